//! Radial basis function network classifier.
//!
//! Training: k-means++ seeding and Lloyd iterations place `k` Gaussian
//! centres; each width is the mean distance to the two nearest other centres;
//! linear output weights (with bias) are fitted to one-hot targets by ridge
//! regression. Class probabilities are the clamped, renormalized outputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const MIN_WIDTH: f64 = 1e-6;
pub const MODEL_FORMAT: &str = "gaze-ident-rbfn";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfnConfig {
    pub k: usize,
    pub seed: u64,
    pub ridge_lambda: f64,
    pub kmeans_max_iters: usize,
}

impl Default for RbfnConfig {
    fn default() -> Self {
        Self {
            k: 32,
            seed: 0,
            ridge_lambda: 1e-6,
            kmeans_max_iters: 100,
        }
    }
}

impl RbfnConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfnModel {
    pub dim: usize,
    /// `k` rows of length `dim`.
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    /// `(k + 1) x C`, row `k` is the bias.
    pub weights: Vec<Vec<f64>>,
    pub classes: Vec<String>,
    pub config: RbfnConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: RbfnModel,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ initialisation followed by Lloyd iterations.
///
/// Stops at an assignment fixpoint or after `max_iters`. Empty clusters keep
/// their previous centre. Returns the centres in row-major order.
pub fn kmeans(data: &[f64], dim: usize, k: usize, seed: u64, max_iters: usize) -> Vec<f64> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.extend_from_slice(row(pick));
        let new_center = &centers[c * dim..(c + 1) * dim];
        for (i, d) in nearest.iter_mut().enumerate() {
            let dn = sq_dist(row(i), new_center);
            if dn < *d {
                *d = dn;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let x = row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(x, &centers[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for j in 0..dim {
                    centers[c * dim + j] = sums[c * dim + j] * inv;
                }
            }
        }
    }
    centers
}

fn center_widths(centers: &[Vec<f64>]) -> Vec<f64> {
    let k = centers.len();
    if k == 1 {
        return vec![1.0];
    }
    (0..k)
        .map(|j| {
            let mut d: Vec<f64> = (0..k)
                .filter(|&i| i != j)
                .map(|i| sq_dist(&centers[i], &centers[j]).sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            let m = d.len().min(2);
            (d[..m].iter().sum::<f64>() / m as f64).max(MIN_WIDTH)
        })
        .collect()
}

impl RbfnModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Gaussian activations followed by a trailing 1 for the bias.
    fn hidden(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (c, w) in self.centers.iter().zip(&self.widths) {
            out.push((-sq_dist(x, c) / (2.0 * w * w)).exp());
        }
        out.push(1.0);
    }

    /// Linear outputs before clamping.
    pub fn raw_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut h = Vec::with_capacity(self.k() + 1);
        self.hidden(x, &mut h);
        let mut o = vec![0.0; self.n_classes()];
        for (hj, wrow) in h.iter().zip(&self.weights) {
            for (oc, w) in o.iter_mut().zip(wrow) {
                *oc += hj * w;
            }
        }
        Ok(o)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        fs::write(path, serde_json::to_string(&file)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }
}

/// Trains on a z-scored feature matrix, using its row labels as classes.
pub fn rbfn_train(features: &FeatureMatrix, cfg: &RbfnConfig) -> Result<RbfnModel> {
    rbfn_train_rows(features.values(), features.n_cols(), features.labels(), cfg)
}

/// Trains on row-major `data` with `dim` columns and one label per row.
pub fn rbfn_train_rows(
    data: &[f64],
    dim: usize,
    labels: &[String],
    cfg: &RbfnConfig,
) -> Result<RbfnModel> {
    if dim == 0 || data.len() != labels.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: labels.len() * dim,
            got: data.len(),
        });
    }
    let n = labels.len();
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("RBFN needs k >= 1".into()));
    }
    if n < cfg.k {
        return Err(Error::InsufficientData(format!(
            "RBFN with k={} needs at least {} rows, got {n}",
            cfg.k, cfg.k
        )));
    }
    if !(cfg.ridge_lambda >= 0.0 && cfg.ridge_lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "ridge lambda must be nonnegative, got {}",
            cfg.ridge_lambda
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData(
            "training features must be finite".into(),
        ));
    }
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "RBFN needs at least two classes, got {}",
            classes.len()
        )));
    }

    let flat = kmeans(data, dim, cfg.k, cfg.seed, cfg.kmeans_max_iters);
    let centers: Vec<Vec<f64>> = flat.chunks_exact(dim).map(|c| c.to_vec()).collect();
    let widths = center_widths(&centers);
    let mut model = RbfnModel {
        dim,
        centers,
        widths,
        weights: Vec::new(),
        classes,
        config: *cfg,
    };

    let h_dim = cfg.k + 1;
    let n_classes = model.n_classes();
    let mut gram = DMatrix::<f64>::zeros(h_dim, h_dim);
    let mut rhs = DMatrix::<f64>::zeros(h_dim, n_classes);
    let mut h = Vec::with_capacity(h_dim);
    for (i, label) in labels.iter().enumerate() {
        model.hidden(&data[i * dim..(i + 1) * dim], &mut h);
        let c = model
            .classes
            .binary_search(label)
            .expect("label in class set");
        for a in 0..h_dim {
            rhs[(a, c)] += h[a];
            for b in a..h_dim {
                gram[(a, b)] += h[a] * h[b];
            }
        }
    }
    for a in 0..h_dim {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += cfg.ridge_lambda;
    }
    let solution = gram
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| gram.clone().lu().solve(&rhs))
        .or_else(|| gram.svd(true, true).solve(&rhs, 1e-12).ok())
        .ok_or_else(|| Error::InsufficientData("singular RBFN output system".into()))?;
    model.weights = (0..h_dim)
        .map(|a| (0..n_classes).map(|c| solution[(a, c)]).collect())
        .collect();
    Ok(model)
}

/// Class probabilities: outputs clamped at zero and renormalized, or uniform
/// when no output is positive.
pub fn rbfn_predict_proba(model: &RbfnModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(clamp_normalize(model.raw_outputs(x)?))
}

pub(crate) fn clamp_normalize(mut o: Vec<f64>) -> Vec<f64> {
    for v in o.iter_mut() {
        if v.is_nan() || *v <= 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = o.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        o.iter_mut().for_each(|v| *v /= sum);
    } else {
        let u = 1.0 / o.len() as f64;
        o.iter_mut().for_each(|v| *v = u);
    }
    o
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DerivativeLevel;
    use crate::segmentation::SegmentKind;
    use rand_distr::{Distribution, Normal};

    fn two_blobs() -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, centre) in [("a", -10.0), ("b", 10.0)] {
            for _ in 0..20 {
                rows.push((0..15).map(|_| centre + noise.sample(&mut rng)).collect());
                labels.push(label.to_string());
            }
        }
        FeatureMatrix::from_rows(
            SegmentKind::Fixation,
            DerivativeLevel::POSITION,
            rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn separable_blobs_classified() {
        let m = two_blobs();
        let cfg = RbfnConfig {
            k: 2,
            ..RbfnConfig::default()
        };
        let model = rbfn_train(&m, &cfg).unwrap();
        for (row, label) in m.rows().zip(m.labels()) {
            let p = rbfn_predict_proba(&model, row).unwrap();
            assert_eq!(&model.classes[argmax(&p)], label);
            assert!(p.iter().copied().fold(0.0, f64::max) > 0.9);
        }
    }

    #[test]
    fn training_errors() {
        let m = two_blobs();
        let too_many = RbfnConfig {
            k: 41,
            ..RbfnConfig::default()
        };
        assert!(matches!(
            rbfn_train(&m, &too_many),
            Err(Error::InsufficientData(_))
        ));
        let single = FeatureMatrix::from_rows(
            SegmentKind::Fixation,
            DerivativeLevel::POSITION,
            vec![vec![0.0; 15], vec![1.0; 15]],
            vec!["a".into(), "a".into()],
        )
        .unwrap();
        let k1 = RbfnConfig {
            k: 1,
            ..RbfnConfig::default()
        };
        assert!(rbfn_train(&single, &k1).is_err());
    }

    #[test]
    fn single_center_width_is_one() {
        let m = two_blobs();
        let model = rbfn_train(
            &m,
            &RbfnConfig {
                k: 1,
                ..RbfnConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.widths, vec![1.0]);
    }

    #[test]
    fn uniform_fallback_and_argmax_ties() {
        assert_eq!(clamp_normalize(vec![-1.0, -2.0, 0.0, -0.5]), vec![0.25; 4]);
        assert_eq!(clamp_normalize(vec![3.0, -1.0, 1.0]), vec![0.75, 0.0, 0.25]);
        assert_eq!(argmax(&[0.3, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let m = two_blobs();
        let model = rbfn_train(
            &m,
            &RbfnConfig {
                k: 2,
                ..RbfnConfig::default()
            },
        )
        .unwrap();
        assert!(rbfn_predict_proba(&model, &[0.0; 3]).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let m = two_blobs();
        let model = rbfn_train(
            &m,
            &RbfnConfig {
                k: 4,
                seed: 11,
                ..RbfnConfig::default()
            },
        )
        .unwrap();
        let back = RbfnModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        assert!(RbfnModel::from_json(r#"{"format":"other","version":1,"model":null}"#).is_err());
    }
}
