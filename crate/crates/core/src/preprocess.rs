//! Savitzky-Golay smoothing of the x and y channels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgConfig {
    pub poly_order: usize,
    pub frame_size: usize,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            poly_order: 6,
            frame_size: 15,
        }
    }
}

impl SgConfig {
    pub fn new(poly_order: usize, frame_size: usize) -> Result<Self> {
        let cfg = Self {
            poly_order,
            frame_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "Savitzky-Golay frame size must be odd, got {}",
                self.frame_size
            )));
        }
        if self.poly_order >= self.frame_size {
            return Err(Error::InvalidConfig(format!(
                "Savitzky-Golay order {} must be below frame size {}",
                self.poly_order, self.frame_size
            )));
        }
        Ok(())
    }
}

/// Central-point smoothing weights of the least-squares polynomial fit.
///
/// Nodes are scaled to `[-1, 1]` before forming the normal equations; the
/// value at the centre does not depend on that scaling and the system stays
/// well conditioned for order 6 over 15 points.
pub fn savgol_coefficients(cfg: &SgConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let frame = cfg.frame_size;
    let half = frame / 2;
    let cols = cfg.poly_order + 1;
    let scale = half.max(1) as f64;
    let design = DMatrix::from_fn(frame, cols, |i, j| {
        ((i as f64 - half as f64) / scale).powi(j as i32)
    });
    let normal = design.transpose() * &design;
    let mut e0 = DVector::zeros(cols);
    e0[0] = 1.0;
    let c = normal
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&e0))
        .or_else(|| normal.lu().solve(&e0))
        .ok_or_else(|| Error::InvalidConfig("singular Savitzky-Golay system".into()))?;
    let raw = &design * c;
    // The exact weights are symmetric; average mirrored pairs to remove rounding skew.
    Ok((0..frame)
        .map(|i| 0.5 * (raw[i] + raw[frame - 1 - i]))
        .collect())
}

fn smooth_channel(signal: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let half = weights.len() / 2;
    let at = |i: isize| -> f64 {
        // Mirror about the edge samples: -1 -> 1, n -> n - 2.
        let idx = if i < 0 {
            (-i) as usize
        } else if i as usize >= n {
            2 * (n - 1) - i as usize
        } else {
            i as usize
        };
        signal[idx]
    };
    (0..n)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * at(i as isize + k as isize - half as isize))
                .sum()
        })
        .collect()
}

/// Smooths x and y independently; time base and length are unchanged.
pub fn smooth(traj: &Trajectory, cfg: &SgConfig) -> Result<Trajectory> {
    let weights = savgol_coefficients(cfg)?;
    if traj.len() < cfg.frame_size {
        return Err(Error::TooShort {
            needed: cfg.frame_size,
            got: traj.len(),
        });
    }
    traj.with_positions(
        smooth_channel(traj.x(), &weights),
        smooth_channel(traj.y(), &weights),
    )
}
