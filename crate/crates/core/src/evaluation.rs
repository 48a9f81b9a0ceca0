//! Identification pipeline and experiment protocol.
//!
//! Every recording goes through smoothing, optional fragment cutting, IVT
//! segmentation and feature extraction. Z-score parameters and both RBFN
//! models (fixation and saccade) are fitted on S1 only. Each user's S2
//! session is scored by averaging per-segment probabilities for each model,
//! then fusing the two vectors with equal weights; the prediction is the
//! argmax. Accuracy is the percentage of users identified correctly.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{cut_fragment, Anchor, Dataset, Session, Trajectory};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, zscore_apply, zscore_fit, DerivativeLevel, FeatureMatrix, ZScoreParams,
};
use crate::preprocess::{smooth, SgConfig};
use crate::rbfn::{argmax, rbfn_predict_proba, rbfn_train, RbfnConfig, RbfnModel};
use crate::segmentation::{ivt_segment, IvtConfig, SegmentKind, SegmentedTrajectory};

/// Fragment lengths in seconds used by the fragment sweep.
pub const FRAGMENT_GRID_S: [f64; 7] = [60.0, 80.0, 100.0, 120.0, 130.0, 140.0, 150.0];
pub const DEFAULT_SEED_COUNT: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub duration_s: f64,
    pub anchor: Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub level: DerivativeLevel,
    pub fragment: Option<Fragment>,
    pub seeds: Vec<u64>,
    pub ivt: IvtConfig,
    /// `None` skips smoothing.
    pub sg: Option<SgConfig>,
    /// Template; the seed field is replaced per run.
    pub rbfn: RbfnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            level: DerivativeLevel::MAX,
            fragment: None,
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            ivt: IvtConfig::default(),
            sg: Some(SgConfig::default()),
            rbfn: RbfnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        self.ivt.validate()?;
        if let Some(sg) = &self.sg {
            sg.validate()?;
        }
        if let Some(f) = &self.fragment {
            if !(f.duration_s.is_finite() && f.duration_s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "fragment duration must be positive, got {}",
                    f.duration_s
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Percent, in seed order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample (n - 1) standard deviation; sd is 0 for one value.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn accuracy_percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

/// Equal-weight fusion of fixation and saccade probabilities.
pub fn fuse(p_fix: &[f64], p_sac: &[f64]) -> Result<Vec<f64>> {
    if p_fix.len() != p_sac.len() {
        return Err(Error::DimensionMismatch {
            expected: p_fix.len(),
            got: p_sac.len(),
        });
    }
    Ok(p_fix
        .iter()
        .zip(p_sac)
        .map(|(a, b)| 0.5 * a + 0.5 * b)
        .collect())
}

/// Mean class probability over a session's segment rows, in the model's
/// class order. A session without rows scores uniform.
pub fn session_score(model: &RbfnModel, rows: &FeatureMatrix) -> Result<Vec<f64>> {
    let c = model.n_classes();
    if rows.is_empty() {
        log::warn!(
            "no {} segments in test session; using a uniform score",
            rows.kind()
        );
        return Ok(vec![1.0 / c as f64; c]);
    }
    let mut acc = vec![0.0; c];
    for row in rows.rows() {
        for (a, p) in acc.iter_mut().zip(rbfn_predict_proba(model, row)?) {
            *a += p;
        }
    }
    let n = rows.n_rows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub p_fix: Vec<f64>,
    pub p_sac: Vec<f64>,
    pub p_final: Vec<f64>,
}

/// Smoothing, optional fragment cut and IVT segmentation of one trajectory.
pub fn segment_recording(
    traj: &Trajectory,
    sg: Option<&SgConfig>,
    fragment: Option<&Fragment>,
    ivt: &IvtConfig,
) -> Result<SegmentedTrajectory> {
    let smoothed = match sg {
        Some(cfg) => smooth(traj, cfg)?,
        None => traj.clone(),
    };
    let cut = match fragment {
        Some(f) => cut_fragment(&smoothed, f.duration_s, f.anchor)?,
        None => smoothed,
    };
    ivt_segment(&cut, ivt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSession {
    pub user: String,
    pub fixations: FeatureMatrix,
    pub saccades: FeatureMatrix,
}

/// Z-scored training and test features for one (dataset, configuration).
///
/// Independent of the classifier seed, so it is computed once per
/// experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub users: Vec<String>,
    pub level: DerivativeLevel,
    pub fix_params: ZScoreParams,
    pub sac_params: ZScoreParams,
    pub train_fix: FeatureMatrix,
    pub train_sac: FeatureMatrix,
    pub test: Vec<TestSession>,
}

pub fn prepare(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    dataset.require_single_id()?;
    let users: Vec<String> = dataset.users().into_iter().map(str::to_string).collect();
    if users.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "identification needs at least two users, got {}",
            users.len()
        )));
    }
    let level = cfg.level;
    let per_recording: Vec<(Session, String, FeatureMatrix, FeatureMatrix)> = dataset
        .recordings()
        .par_iter()
        .map(|r| {
            let seg = segment_recording(
                &r.trajectory,
                cfg.sg.as_ref(),
                cfg.fragment.as_ref(),
                &cfg.ivt,
            )?;
            let (fix, sac) = extract_features(&seg, level, &r.user_id);
            Ok((r.session, r.user_id.clone(), fix, sac))
        })
        .collect::<Result<_>>()?;

    let mut raw_fix = FeatureMatrix::empty(SegmentKind::Fixation, level);
    let mut raw_sac = FeatureMatrix::empty(SegmentKind::Saccade, level);
    for (session, _, fix, sac) in &per_recording {
        if *session == Session::S1 {
            raw_fix.append(fix)?;
            raw_sac.append(sac)?;
        }
    }
    if raw_fix.is_empty() || raw_sac.is_empty() {
        return Err(Error::InsufficientData(format!(
            "training sessions yield {} fixations and {} saccades; both kinds are required",
            raw_fix.n_rows(),
            raw_sac.n_rows()
        )));
    }
    let fix_params = zscore_fit(&raw_fix)?;
    let sac_params = zscore_fit(&raw_sac)?;
    let train_fix = zscore_apply(&fix_params, &raw_fix)?;
    let train_sac = zscore_apply(&sac_params, &raw_sac)?;

    let mut test = Vec::with_capacity(users.len());
    for (session, user, fix, sac) in &per_recording {
        if *session == Session::S2 {
            test.push(TestSession {
                user: user.clone(),
                fixations: zscore_apply(&fix_params, fix)?,
                saccades: zscore_apply(&sac_params, sac)?,
            });
        }
    }
    Ok(PreparedData {
        users,
        level,
        fix_params,
        sac_params,
        train_fix,
        train_sac,
        test,
    })
}

fn truncate_params(p: &ZScoreParams, n: usize) -> ZScoreParams {
    ZScoreParams {
        means: p.means[..n].to_vec(),
        stds: p.stds[..n].to_vec(),
        flagged: p.flagged[..n].to_vec(),
    }
}

impl PreparedData {
    /// The same data restricted to a lower derivative level. Equal to
    /// preparing at that level directly, because columns and their z-scores
    /// are independent.
    pub fn with_level(&self, level: DerivativeLevel) -> Result<Self> {
        let n = level.n_features();
        Ok(Self {
            users: self.users.clone(),
            level,
            fix_params: truncate_params(&self.fix_params, n),
            sac_params: truncate_params(&self.sac_params, n),
            train_fix: self.train_fix.truncate_level(level)?,
            train_sac: self.train_sac.truncate_level(level)?,
            test: self
                .test
                .iter()
                .map(|t| {
                    Ok(TestSession {
                        user: t.user.clone(),
                        fixations: t.fixations.truncate_level(level)?,
                        saccades: t.saccades.truncate_level(level)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub fixation: RbfnModel,
    pub saccade: RbfnModel,
}

/// Trains both models; the fixation model uses `seed`, the saccade model `seed + 1`.
pub fn train_models(
    prep: &PreparedData,
    template: &RbfnConfig,
    seed: u64,
) -> Result<TrainedModels> {
    Ok(TrainedModels {
        fixation: rbfn_train(&prep.train_fix, &template.with_seed(seed))?,
        saccade: rbfn_train(&prep.train_sac, &template.with_seed(seed.wrapping_add(1)))?,
    })
}

/// Spreads a model-space probability vector over the full user list.
fn align(p: &[f64], classes: &[String], users: &[String]) -> Vec<f64> {
    let mut out = vec![0.0; users.len()];
    for (pc, class) in p.iter().zip(classes) {
        if let Ok(i) = users.binary_search(class) {
            out[i] = *pc;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPrediction {
    pub user: String,
    pub predicted: String,
    pub score: SessionScore,
}

impl UserPrediction {
    pub fn is_correct(&self) -> bool {
        self.user == self.predicted
    }
}

pub fn identify_sessions(
    prep: &PreparedData,
    models: &TrainedModels,
) -> Result<Vec<UserPrediction>> {
    prep.test
        .iter()
        .map(|t| {
            let m = &models.fixation;
            let p_fix = align(&session_score(m, &t.fixations)?, &m.classes, &prep.users);
            let m = &models.saccade;
            let p_sac = align(&session_score(m, &t.saccades)?, &m.classes, &prep.users);
            let p_final = fuse(&p_fix, &p_sac)?;
            Ok(UserPrediction {
                user: t.user.clone(),
                predicted: prep.users[argmax(&p_final)].clone(),
                score: SessionScore {
                    p_fix,
                    p_sac,
                    p_final,
                },
            })
        })
        .collect()
}

fn accuracy_for_seed(prep: &PreparedData, template: &RbfnConfig, seed: u64) -> Result<f64> {
    let models = train_models(prep, template, seed)?;
    let predictions = identify_sessions(prep, &models)?;
    let correct = predictions.iter().filter(|p| p.is_correct()).count();
    Ok(accuracy_percent(correct, predictions.len()))
}

/// Accuracy (percent) of one full pipeline run with classifier seed `seed`.
pub fn run_identification(dataset: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let prep = prepare(dataset, cfg)?;
    accuracy_for_seed(&prep, &cfg.rbfn, seed)
}

/// Runs every seed of `cfg` on already prepared data.
pub fn run_prepared(prep: &PreparedData, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let accuracies: Vec<f64> = cfg
        .seeds
        .par_iter()
        .map(|&seed| accuracy_for_seed(prep, &cfg.rbfn, seed))
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&accuracies);
    Ok(ExperimentResult {
        config: ExperimentConfig {
            level: prep.level,
            ..cfg.clone()
        },
        accuracies,
        mean,
        sd,
    })
}

pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let prep = prepare(dataset, cfg)?;
    run_prepared(&prep, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: DerivativeLevel,
    pub n_features: usize,
    pub result: ExperimentResult,
}

fn sweep_levels(prep_max: &PreparedData, base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    DerivativeLevel::all()
        .map(|level| {
            let prep = prep_max.with_level(level)?;
            let cfg = ExperimentConfig {
                level,
                ..base.clone()
            };
            Ok(SweepRow {
                level,
                n_features: level.n_features(),
                result: run_prepared(&prep, &cfg)?,
            })
        })
        .collect()
}

/// One experiment per derivative level 0..=5; `base_cfg.level` is ignored.
pub fn derivative_sweep(dataset: &Dataset, base_cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let cfg = ExperimentConfig {
        level: DerivativeLevel::MAX,
        ..base_cfg.clone()
    };
    let prep = prepare(dataset, &cfg)?;
    sweep_levels(&prep, base_cfg)
}

pub fn write_derivative_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "level,n_features,mean,sd")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.level.get(),
            r.n_features,
            r.result.mean,
            r.result.sd
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentCell {
    pub fragment: Fragment,
    pub level: DerivativeLevel,
    pub n_features: usize,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestFragment {
    pub fragment: Fragment,
    pub best_level: DerivativeLevel,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentSweep {
    pub cells: Vec<FragmentCell>,
    pub best: Vec<BestFragment>,
}

/// Full grid over [`FRAGMENT_GRID_S`] x {start, end} x levels 0..=5.
pub fn fragment_sweep(dataset: &Dataset, base_cfg: &ExperimentConfig) -> Result<FragmentSweep> {
    fragment_sweep_with(dataset, base_cfg, &FRAGMENT_GRID_S)
}

pub fn fragment_sweep_with(
    dataset: &Dataset,
    base_cfg: &ExperimentConfig,
    durations_s: &[f64],
) -> Result<FragmentSweep> {
    let mut cells = Vec::new();
    let mut best = Vec::new();
    for &duration_s in durations_s {
        for anchor in [Anchor::Start, Anchor::End] {
            let fragment = Fragment { duration_s, anchor };
            let cfg = ExperimentConfig {
                level: DerivativeLevel::MAX,
                fragment: Some(fragment),
                ..base_cfg.clone()
            };
            let prep = prepare(dataset, &cfg)?;
            let rows = sweep_levels(&prep, &cfg)?;
            // Highest mean wins; ties keep the lower level.
            let winner = rows
                .iter()
                .fold(None::<&SweepRow>, |acc, r| match acc {
                    Some(a) if a.result.mean >= r.result.mean => Some(a),
                    _ => Some(r),
                })
                .expect("six levels");
            best.push(BestFragment {
                fragment,
                best_level: winner.level,
                mean: winner.result.mean,
                sd: winner.result.sd,
            });
            cells.extend(rows.into_iter().map(|r| FragmentCell {
                fragment,
                level: r.level,
                n_features: r.n_features,
                result: r.result,
            }));
        }
    }
    Ok(FragmentSweep { cells, best })
}

pub fn write_fragment_csv<W: Write>(mut w: W, sweep: &FragmentSweep) -> io::Result<()> {
    writeln!(w, "duration,anchor,best_level,mean,sd")?;
    for b in &sweep.best {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.fragment.duration_s,
            b.fragment.anchor,
            b.best_level.get(),
            b.mean,
            b.sd
        )?;
    }
    Ok(())
}
