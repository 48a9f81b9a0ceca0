//! Seeded synthetic gaze datasets with per-user behavioural signatures.
//!
//! Each user gets a [`UserProfile`] drawn from the global seed. A session is
//! an alternating sequence of fixations and saccades:
//!
//! - fixations hold a point with correlated (AR(1)) Gaussian jitter of
//!   `fix_jitter_deg`, lasting a clipped-normal duration around
//!   `mean_fix_duration_s` and never shorter than [`MIN_FIXATION_S`];
//! - saccades follow a minimum-jerk position profile to the next point, with
//!   a clipped-normal amplitude and a duration chosen so the peak velocity is
//!   about `sac_peak_velocity_scale * amplitude`, floored at
//!   [`MIN_PEAK_VELOCITY`].
//!
//! Both sessions of a user share the profile and differ only in their random
//! event sequence and white measurement noise (`session_noise_scale`, degrees).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Manifest, Recording, Session, Trajectory, GROUND_TRUTH_DIR};
use crate::error::{Error, Result};
use crate::segmentation::{Segment, SegmentKind};

pub use crate::data::write_dataset;

pub const MIN_FIXATION_S: f64 = 0.12;
/// Twice the default velocity threshold.
pub const MIN_PEAK_VELOCITY: f64 = 180.0;
pub const MIN_SACCADE_AMPLITUDE: f64 = 2.0;
pub const MAX_SACCADE_AMPLITUDE: f64 = 30.0;
/// Fixation points stay inside +-FIELD_HALF_WIDTH degrees on both axes.
pub const FIELD_HALF_WIDTH: f64 = 15.0;
/// Correlation time of the fixational jitter.
pub const JITTER_TAU_S: f64 = 0.05;

pub const FIX_DURATION_RANGE: (f64, f64) = (0.15, 0.6);
pub const FIX_JITTER_RANGE: (f64, f64) = (0.01, 0.2);
pub const SAC_AMPLITUDE_RANGE: (f64, f64) = (2.0, 15.0);
pub const SAC_VELOCITY_SCALE_RANGE: (f64, f64) = (20.0, 60.0);
/// Within-user spread (sd / mean) of fixation durations and saccade amplitudes.
pub const FIX_DURATION_CV: f64 = 0.15;
pub const SAC_AMPLITUDE_CV: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub mean_fix_duration_s: f64,
    pub fix_jitter_deg: f64,
    pub mean_sac_amplitude_deg: f64,
    /// Peak saccade velocity per degree of amplitude (deg/s/deg).
    pub sac_peak_velocity_scale: f64,
    /// Seed from which this user's session seeds are derived.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub seed: u64,
    pub session_noise_scale: f64,
    pub dataset_id: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 10,
            duration_s: 200.0,
            rate_hz: 200.0,
            seed: 0,
            session_noise_scale: 0.02,
            dataset_id: "SYN".to_string(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 {
            return Err(Error::InvalidConfig(format!(
                "synthetic dataset needs at least 2 users, got {}",
                self.n_users
            )));
        }
        if !(self.duration_s >= 10.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "session duration must be at least 10 s, got {}",
                self.duration_s
            )));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if !(self.session_noise_scale >= 0.0 && self.session_noise_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "session noise must be nonnegative, got {}",
                self.session_noise_scale
            )));
        }
        if self.dataset_id.is_empty() || self.dataset_id == GROUND_TRUTH_DIR {
            return Err(Error::InvalidConfig(format!(
                "invalid dataset id {:?}",
                self.dataset_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub kind: SegmentKind,
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_t: f64,
    pub end_t: f64,
}

/// Emitted events keyed by `(user_id, session)`.
pub type GroundTruth = BTreeMap<(String, Session), Vec<GroundTruthEvent>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub profiles: Vec<UserProfile>,
    pub truth: GroundTruth,
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(seed) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn user_id(index: usize, n_users: usize) -> String {
    let width = n_users.to_string().len().max(2);
    format!("u{:0width$}", index + 1)
}

/// Draws the profile of user `index` from the global seed.
pub fn draw_profile(seed: u64, index: usize, n_users: usize) -> UserProfile {
    let user_seed = sub_seed(seed, index as u64, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(user_seed);
    let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    UserProfile {
        user_id: user_id(index, n_users),
        mean_fix_duration_s: uniform(FIX_DURATION_RANGE),
        fix_jitter_deg: uniform(FIX_JITTER_RANGE),
        mean_sac_amplitude_deg: uniform(SAC_AMPLITUDE_RANGE),
        sac_peak_velocity_scale: uniform(SAC_VELOCITY_SCALE_RANGE),
        seed: user_seed,
    }
}

fn min_jerk(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

struct SessionBuilder<'a> {
    profile: &'a UserProfile,
    rate: f64,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    unit: Normal<f64>,
    jitter: (f64, f64),
    rho: f64,
    innovation: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    events: Vec<GroundTruthEvent>,
}

impl<'a> SessionBuilder<'a> {
    fn new(profile: &'a UserProfile, cfg: &SynthConfig, seed: u64) -> Self {
        let rate = cfg.rate_hz;
        let rho = (-1.0 / (rate * JITTER_TAU_S)).exp();
        let sigma = profile.fix_jitter_deg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let jitter = (sigma * unit.sample(&mut rng), sigma * unit.sample(&mut rng));
        Self {
            profile,
            rate,
            rng,
            noise: Normal::new(0.0, cfg.session_noise_scale).expect("noise scale validated"),
            unit,
            jitter,
            rho,
            innovation: sigma * (1.0 - rho * rho).sqrt(),
            x: Vec::new(),
            y: Vec::new(),
            events: Vec::new(),
        }
    }

    fn push(&mut self, cx: f64, cy: f64) {
        let (jx, jy) = self.jitter;
        let nx = self.noise.sample(&mut self.rng);
        let ny = self.noise.sample(&mut self.rng);
        self.x.push(cx + jx + nx);
        self.y.push(cy + jy + ny);
        let ex = self.unit.sample(&mut self.rng);
        let ey = self.unit.sample(&mut self.rng);
        self.jitter = (
            self.rho * jx + self.innovation * ex,
            self.rho * jy + self.innovation * ey,
        );
    }

    fn event(&mut self, kind: SegmentKind, start: usize) {
        let end = self.x.len();
        if end > start {
            self.events.push(GroundTruthEvent {
                kind,
                start_idx: start,
                end_idx: end,
                start_t: start as f64 / self.rate,
                end_t: end as f64 / self.rate,
            });
        }
    }

    fn clipped_normal(&mut self, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
        (mean + sd * self.unit.sample(&mut self.rng)).clamp(lo, hi)
    }

    fn fixation(&mut self, cx: f64, cy: f64) {
        let mean = self.profile.mean_fix_duration_s;
        let duration =
            self.clipped_normal(mean, FIX_DURATION_CV * mean, MIN_FIXATION_S, 3.0 * mean);
        let count = (duration * self.rate).ceil() as usize;
        let start = self.x.len();
        for _ in 0..count {
            self.push(cx, cy);
        }
        self.event(SegmentKind::Fixation, start);
    }

    /// Moves from `(cx, cy)` to a new point and returns it.
    fn saccade(&mut self, cx: f64, cy: f64) -> (f64, f64) {
        let mean = self.profile.mean_sac_amplitude_deg;
        let amplitude = self.clipped_normal(
            mean,
            SAC_AMPLITUDE_CV * mean,
            MIN_SACCADE_AMPLITUDE,
            MAX_SACCADE_AMPLITUDE,
        );
        let theta = self.rng.random::<f64>() * std::f64::consts::TAU;
        let (mut dx, mut dy) = (amplitude * theta.cos(), amplitude * theta.sin());
        if (cx + dx).abs() > FIELD_HALF_WIDTH {
            dx = -dx;
        }
        if (cy + dy).abs() > FIELD_HALF_WIDTH {
            dy = -dy;
        }
        let peak = (self.profile.sac_peak_velocity_scale * amplitude).max(MIN_PEAK_VELOCITY);
        // Minimum-jerk peak velocity is 1.875 * amplitude / duration.
        let duration = 1.875 * amplitude / peak;
        let intervals = ((duration * self.rate).round() as usize).max(4);
        let start = self.x.len();
        for k in 1..intervals {
            let s = min_jerk(k as f64 / intervals as f64);
            self.push(cx + dx * s, cy + dy * s);
        }
        self.event(SegmentKind::Saccade, start);
        (cx + dx, cy + dy)
    }
}

fn generate_session(
    profile: &UserProfile,
    cfg: &SynthConfig,
    session: Session,
) -> Result<(Trajectory, Vec<GroundTruthEvent>)> {
    let session_seed = sub_seed(profile.seed, 1, session as u64 + 1);
    let n = (cfg.duration_s * cfg.rate_hz).round() as usize;
    let mut b = SessionBuilder::new(profile, cfg, session_seed);
    let mut cx = (b.rng.random::<f64>() - 0.5) * 20.0;
    let mut cy = (b.rng.random::<f64>() - 0.5) * 20.0;
    while b.x.len() < n {
        b.fixation(cx, cy);
        if b.x.len() >= n {
            break;
        }
        (cx, cy) = b.saccade(cx, cy);
    }
    b.x.truncate(n);
    b.y.truncate(n);
    let rate = b.rate;
    let mut events = b.events;
    events.retain(|e| e.start_idx < n);
    if let Some(last) = events.last_mut() {
        last.end_idx = last.end_idx.min(n);
        last.end_t = last.end_idx as f64 / rate;
    }
    Ok((Trajectory::uniform(cfg.rate_hz, b.x, b.y)?, events))
}

/// Generates a dataset for explicit profiles (one user per profile).
pub fn generate_from_profiles(
    cfg: &SynthConfig,
    profiles: Vec<UserProfile>,
) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut recordings = Vec::new();
    let mut truth = GroundTruth::new();
    for p in &profiles {
        for session in Session::ALL {
            let (trajectory, events) = generate_session(p, cfg, session)?;
            recordings.push(Recording {
                user_id: p.user_id.clone(),
                dataset_id: cfg.dataset_id.clone(),
                session,
                trajectory,
            });
            truth.insert((p.user_id.clone(), session), events);
        }
    }
    let mut manifest = Manifest::new(cfg.rate_hz, format!("synthetic seed={}", cfg.seed));
    manifest
        .extra
        .insert("generator".to_string(), serde_json::to_value(cfg)?);
    Ok(SyntheticDataset {
        dataset: Dataset::new(recordings, manifest)?,
        profiles,
        truth,
    })
}

pub fn generate_full(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let profiles = (0..cfg.n_users)
        .map(|i| draw_profile(cfg.seed, i, cfg.n_users))
        .collect();
    generate_from_profiles(cfg, profiles)
}

/// Generates the dataset only; see [`generate_full`] for profiles and ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    Ok(generate_full(cfg)?.dataset)
}

/// Writes `ground_truth/<user>/<session>.csv` with `kind,start_t,end_t`.
pub fn write_ground_truth(truth: &GroundTruth, root: impl AsRef<Path>) -> Result<()> {
    let base = root.as_ref().join(GROUND_TRUTH_DIR);
    for ((user, session), events) in truth {
        let dir = base.join(user);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("{session}.csv"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&path, e);
        writeln!(w, "kind,start_t,end_t").map_err(io)?;
        for e in events {
            writeln!(w, "{},{},{}", e.kind, e.start_t, e.end_t).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// Writes the dataset layout plus `profiles.json` and the ground-truth logs.
pub fn write_synthetic(
    synth: &SyntheticDataset,
    root: impl AsRef<Path>,
    force: bool,
) -> Result<()> {
    let root = root.as_ref();
    write_dataset(&synth.dataset, root, force)?;
    write_ground_truth(&synth.truth, root)?;
    let path = root.join(GROUND_TRUTH_DIR).join("profiles.json");
    let mut json = serde_json::to_string_pretty(&synth.profiles)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

/// Fixation recall and precision of detected segments against ground truth.
///
/// A ground-truth fixation is recalled when its midpoint sample lies inside a
/// detected fixation; a detected fixation is precise when its midpoint lies
/// inside a ground-truth fixation.
pub fn fixation_recall_precision(truth: &[GroundTruthEvent], detected: &[Segment]) -> (f64, f64) {
    let inside =
        |mid: usize, spans: &[(usize, usize)]| spans.iter().any(|&(s, e)| s <= mid && mid < e);
    let gt: Vec<(usize, usize)> = truth
        .iter()
        .filter(|e| e.kind == SegmentKind::Fixation)
        .map(|e| (e.start_idx, e.end_idx))
        .collect();
    let det: Vec<(usize, usize)> = detected
        .iter()
        .filter(|s| s.kind == SegmentKind::Fixation)
        .map(|s| (s.start_idx, s.end_idx))
        .collect();
    let ratio = |hits: usize, total: usize| {
        if total == 0 {
            1.0
        } else {
            hits as f64 / total as f64
        }
    };
    let recalled = gt.iter().filter(|(s, e)| inside((s + e) / 2, &det)).count();
    let precise = det.iter().filter(|(s, e)| inside((s + e) / 2, &gt)).count();
    (ratio(recalled, gt.len()), ratio(precise, det.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut cfg = SynthConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_users = 1;
        assert!(cfg.validate().is_err());
        cfg.n_users = 3;
        cfg.duration_s = 5.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn profiles_within_ranges_and_seed_dependent() {
        for i in 0..20 {
            let p = draw_profile(1, i, 20);
            assert!((0.15..=0.6).contains(&p.mean_fix_duration_s));
            assert!((0.01..=0.2).contains(&p.fix_jitter_deg));
            assert!((2.0..=15.0).contains(&p.mean_sac_amplitude_deg));
            assert!((20.0..=60.0).contains(&p.sac_peak_velocity_scale));
        }
        assert_ne!(draw_profile(1, 0, 2), draw_profile(2, 0, 2));
        assert_eq!(draw_profile(1, 0, 2), draw_profile(1, 0, 2));
    }

    #[test]
    fn user_ids_are_padded() {
        assert_eq!(user_id(0, 12), "u01");
        assert_eq!(user_id(99, 150), "u100");
    }

    #[test]
    fn events_tile_the_session() {
        let cfg = SynthConfig {
            n_users: 2,
            duration_s: 12.0,
            ..SynthConfig::default()
        };
        let synth = generate_full(&cfg).unwrap();
        for events in synth.truth.values() {
            assert_eq!(events[0].start_idx, 0);
            for w in events.windows(2) {
                assert_eq!(w[0].end_idx, w[1].start_idx);
                assert_ne!(w[0].kind, w[1].kind);
            }
            assert_eq!(events.last().unwrap().end_idx, 2400);
            for e in events.iter().take(events.len() - 1) {
                if e.kind == SegmentKind::Fixation {
                    assert!(e.end_t - e.start_t >= MIN_FIXATION_S - 1e-12);
                }
            }
        }
    }
}
