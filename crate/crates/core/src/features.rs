//! Per-segment feature vectors and z-score normalization.
//!
//! Column layout (1-based, matching the feature table used throughout the
//! crate):
//!
//! | columns   | content                                                      |
//! |-----------|--------------------------------------------------------------|
//! | 1..=15    | position features, see [`POSITION_FEATURES`]                 |
//! | +18 each  | derivative order k = 1..=level: M3S2K of angular, x, y       |
//!
//! M3S2K is (mean, median, max, std, skewness, kurtosis). The order-k x and y
//! channels are k-fold forward differences of the segment's positions; the
//! angular channel is the speed sequence differenced k - 1 times.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::data::Session;
use crate::error::{Error, Result};
use crate::segmentation::{SegmentKind, SegmentView, SegmentedTrajectory};

pub const POSITION_FEATURES: [&str; 15] = [
    "Duration",
    "Path length",
    "Skew X",
    "Skew Y",
    "Kurtosis X",
    "Kurtosis Y",
    "Std X",
    "Std Y",
    "Ratio",
    "Angle",
    "Amplitude",
    "Dispersion",
    "Dist to previous",
    "Angle with previous",
    "Average speed",
];

pub const N_POSITION_FEATURES: usize = 15;
pub const FEATURES_PER_ORDER: usize = 18;
pub const MAX_LEVEL: u8 = 5;

const STAT_NAMES: [&str; 6] = ["Mean", "Median", "Max", "Std", "Skew", "Kurtosis"];
const ORDER_NAMES: [&str; 5] = ["velocity", "acceleration", "jerk", "jounce", "crackle"];

/// Highest derivative order included: 0 = position only, 5 = up to crackle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DerivativeLevel(u8);

impl DerivativeLevel {
    pub const POSITION: Self = Self(0);
    pub const MAX: Self = Self(MAX_LEVEL);

    pub fn new(level: u8) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "derivative level must be 0..={MAX_LEVEL}, got {level}"
            )));
        }
        Ok(Self(level))
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..=MAX_LEVEL).map(Self)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn n_features(self) -> usize {
        N_POSITION_FEATURES + FEATURES_PER_ORDER * self.0 as usize
    }

    pub fn name(self) -> &'static str {
        [
            "Position",
            "Velocity",
            "Acceleration",
            "Jerk",
            "Jounce",
            "Crackle",
        ][self.0 as usize]
    }
}

impl TryFrom<u8> for DerivativeLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DerivativeLevel> for u8 {
    fn from(l: DerivativeLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for DerivativeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name(), self.0)
    }
}

/// Human-readable names for the first `level.n_features()` columns.
pub fn feature_names(level: DerivativeLevel) -> Vec<String> {
    let mut names: Vec<String> = POSITION_FEATURES.iter().map(|s| s.to_string()).collect();
    for order in ORDER_NAMES.iter().take(level.get() as usize) {
        for channel in [
            format!("ang {order}"),
            format!("{order} X"),
            format!("{order} Y"),
        ] {
            for stat in STAT_NAMES {
                names.push(format!("{stat} {channel}"));
            }
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub segment_kind: SegmentKind,
}

/// Row-major feature rows of one segment kind, each labelled with its user.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    kind: SegmentKind,
    level: DerivativeLevel,
    values: Vec<f64>,
    labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn empty(kind: SegmentKind, level: DerivativeLevel) -> Self {
        Self {
            kind,
            level,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(
        kind: SegmentKind,
        level: DerivativeLevel,
        rows: Vec<Vec<f64>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let mut m = Self::empty(kind, level);
        for (row, label) in rows.into_iter().zip(labels) {
            m.push_row(&row, label)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64], label: String) -> Result<()> {
        if row.len() != self.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.n_cols() != self.n_cols() || other.kind != self.kind {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: other.n_cols(),
            });
        }
        self.values.extend_from_slice(&other.values);
        self.labels.extend(other.labels.iter().cloned());
        Ok(())
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn level(&self) -> DerivativeLevel {
        self.level
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.level.n_features()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps the leading columns of a lower derivative level. Columns of
    /// lower levels are a prefix of higher ones, so this equals extracting
    /// at `level` directly.
    pub fn truncate_level(&self, level: DerivativeLevel) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidConfig(format!(
                "cannot widen level {} to {}",
                self.level.get(),
                level.get()
            )));
        }
        let keep = level.n_features();
        Ok(Self {
            kind: self.kind,
            level,
            values: self
                .rows()
                .flat_map(|r| r[..keep].iter().copied())
                .collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn vectors(&self) -> impl Iterator<Item = FeatureVector> + '_ {
        self.rows().map(|r| FeatureVector {
            values: r.to_vec(),
            segment_kind: self.kind,
        })
    }
}

/// Forward difference scaled by the sampling rate.
pub fn forward_diff(signal: &[f64], rate_hz: f64) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: signal.len(),
        });
    }
    Ok(diff(signal, rate_hz))
}

fn diff(signal: &[f64], rate_hz: f64) -> Vec<f64> {
    signal.windows(2).map(|w| (w[1] - w[0]) * rate_hz).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M3s2k {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl M3s2k {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.mean,
            self.median,
            self.max,
            self.std,
            self.skewness,
            self.kurtosis,
        ]
    }
}

/// Mean, median, max, sample std, Fisher-Pearson skewness and excess kurtosis.
///
/// Conventions for degenerate input: std is 0 for a single value; skewness is
/// 0 when std is 0 or n < 3; kurtosis is 0 when std is 0 or n < 4.
pub fn m3s2k(values: &[f64]) -> Result<M3s2k> {
    if values.is_empty() {
        return Err(Error::InsufficientData("M3S2K of an empty sequence".into()));
    }
    let n = values.len();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    if max == min {
        return Ok(M3s2k {
            mean: max,
            median,
            max,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = if n > 1 { (m2 / (nf - 1.0)).sqrt() } else { 0.0 };
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let degenerate = std == 0.0 || m2 <= 0.0;
    let skewness = if degenerate || n < 3 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    };
    let kurtosis = if degenerate || n < 4 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    };
    Ok(M3s2k {
        mean,
        median,
        max,
        std,
        skewness,
        kurtosis,
    })
}

fn stats_or_zero(values: &[f64]) -> [f64; 6] {
    m3s2k(values).map(M3s2k::to_array).unwrap_or([0.0; 6])
}

fn centroid(view: &SegmentView<'_>) -> (f64, f64) {
    let n = view.x.len() as f64;
    (
        view.x.iter().sum::<f64>() / n,
        view.y.iter().sum::<f64>() / n,
    )
}

fn displacement(view: &SegmentView<'_>) -> (f64, f64) {
    let last = view.x.len() - 1;
    (view.x[last] - view.x[0], view.y[last] - view.y[0])
}

/// Unsigned angle between two vectors in `[0, pi]`; 0 if either is zero.
fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    if (a.0 == 0.0 && a.1 == 0.0) || (b.0 == 0.0 && b.1 == 0.0) {
        return 0.0;
    }
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    cross.abs().atan2(dot)
}

fn position_features(
    view: &SegmentView<'_>,
    duration_s: f64,
    rate_hz: f64,
    previous: Option<&SegmentView<'_>>,
    out: &mut Vec<f64>,
) {
    let (x, y) = (view.x, view.y);
    let steps: Vec<f64> = (1..x.len())
        .map(|i| (x[i] - x[i - 1]).hypot(y[i] - y[i - 1]))
        .collect();
    let path_length: f64 = steps.iter().sum();
    let max_speed = steps.iter().copied().fold(0.0, f64::max) * rate_hz;
    let sx = stats_or_zero(x);
    let sy = stats_or_zero(y);
    let disp = displacement(view);
    let angle = if disp == (0.0, 0.0) {
        0.0
    } else {
        disp.1.atan2(disp.0)
    };
    let spread = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (dist_prev, angle_prev) = match previous {
        Some(prev) => {
            let (cx, cy) = centroid(view);
            let (px, py) = centroid(prev);
            (
                (cx - px).hypot(cy - py),
                angle_between(displacement(prev), disp),
            )
        }
        None => (0.0, 0.0),
    };
    out.extend_from_slice(&[
        duration_s,
        path_length,
        sx[4],
        sy[4],
        sx[5],
        sy[5],
        sx[3],
        sy[3],
        max_speed / duration_s,
        angle,
        disp.0.hypot(disp.1),
        spread(x) + spread(y),
        dist_prev,
        angle_prev,
        path_length / duration_s,
    ]);
}

fn derivative_features(view: &SegmentView<'_>, rate_hz: f64, level: u8, out: &mut Vec<f64>) {
    let n = view.x.len();
    let mut dx = view.x.to_vec();
    let mut dy = view.y.to_vec();
    let mut ang: Vec<f64> = Vec::new();
    for order in 1..=level as usize {
        if n < order + 1 {
            out.extend_from_slice(&[0.0; FEATURES_PER_ORDER]);
            continue;
        }
        dx = diff(&dx, rate_hz);
        dy = diff(&dy, rate_hz);
        ang = if order == 1 {
            dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect()
        } else {
            diff(&ang, rate_hz)
        };
        out.extend_from_slice(&stats_or_zero(&ang));
        out.extend_from_slice(&stats_or_zero(&dx));
        out.extend_from_slice(&stats_or_zero(&dy));
    }
}

/// Extracts one feature row per segment, split by kind, labelled `label`.
///
/// Rows keep segment order. Features 13 and 14 refer to the preceding
/// segment of either kind and are 0 for the first segment.
pub fn extract_features(
    seg: &SegmentedTrajectory,
    level: DerivativeLevel,
    label: &str,
) -> (FeatureMatrix, FeatureMatrix) {
    let rate = seg.trajectory.rate_hz();
    let mut fix = FeatureMatrix::empty(SegmentKind::Fixation, level);
    let mut sac = FeatureMatrix::empty(SegmentKind::Saccade, level);
    let mut row = Vec::with_capacity(level.n_features());
    let mut previous: Option<SegmentView<'_>> = None;
    for s in &seg.segments {
        let view = seg.kinematic_window(s);
        row.clear();
        position_features(&view, s.duration_s, rate, previous.as_ref(), &mut row);
        derivative_features(&view, rate, level.get(), &mut row);
        debug_assert_eq!(row.len(), level.n_features());
        let target = match s.kind {
            SegmentKind::Fixation => &mut fix,
            SegmentKind::Saccade => &mut sac,
        };
        target.values.extend_from_slice(&row);
        target.labels.push(label.to_string());
        previous = Some(view);
    }
    (fix, sac)
}

/// Writes feature rows as `user,session,kind,f1..fN`.
pub fn write_features_csv<'a, W, I>(mut w: W, level: DerivativeLevel, blocks: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (Session, &'a FeatureMatrix)>,
{
    write!(w, "user,session,kind")?;
    for j in 1..=level.n_features() {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for (session, m) in blocks {
        for (row, label) in m.rows().zip(m.labels()) {
            write!(w, "{label},{session},{}", m.kind())?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns whose training std is zero; they map to 0.
    pub flagged: Vec<bool>,
}

/// Per-column mean and sample std over the training rows.
pub fn zscore_fit(train: &FeatureMatrix) -> Result<ZScoreParams> {
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "z-score fit needs at least one training row".into(),
        ));
    }
    let n = train.n_rows() as f64;
    let cols = train.n_cols();
    let mut means = vec![0.0; cols];
    let mut stds = vec![0.0; cols];
    let mut flagged = vec![false; cols];
    for j in 0..cols {
        let col = train.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi || train.n_rows() < 2 {
            means[j] = col.iter().sum::<f64>() / n;
            flagged[j] = true;
            continue;
        }
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        means[j] = mean;
        stds[j] = var.sqrt();
        flagged[j] = !(stds[j] > 0.0 && stds[j].is_finite());
    }
    Ok(ZScoreParams {
        means,
        stds,
        flagged,
    })
}

pub fn zscore_apply(params: &ZScoreParams, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    if params.means.len() != matrix.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: params.means.len(),
            got: matrix.n_cols(),
        });
    }
    let cols = matrix.n_cols();
    let values = matrix
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let j = i % cols;
            if params.flagged[j] {
                0.0
            } else {
                (v - params.means[j]) / params.stds[j]
            }
        })
        .collect();
    Ok(FeatureMatrix {
        values,
        ..matrix.clone()
    })
}
