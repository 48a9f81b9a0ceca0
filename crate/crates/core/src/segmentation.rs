//! Velocity-threshold (IVT) segmentation into fixations and saccades.
//!
//! Velocities are computed per inter-sample interval. Interval `i` joins
//! samples `i` and `i + 1`; a segment spanning intervals `start..end` owns
//! samples `start..end`, and the final sample of the trajectory joins the last
//! segment.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::preprocess::{smooth, SgConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvtConfig {
    pub vt_deg_per_s: f64,
    pub mfd_s: f64,
}

impl Default for IvtConfig {
    fn default() -> Self {
        Self {
            vt_deg_per_s: 90.0,
            mfd_s: 0.096,
        }
    }
}

impl IvtConfig {
    pub fn new(vt_deg_per_s: f64, mfd_s: f64) -> Result<Self> {
        let cfg = Self {
            vt_deg_per_s,
            mfd_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vt_deg_per_s.is_finite() && self.vt_deg_per_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "velocity threshold must be positive, got {}",
                self.vt_deg_per_s
            )));
        }
        if !(self.mfd_s.is_finite() && self.mfd_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "minimum fixation duration must be positive, got {}",
                self.mfd_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentKind {
    Fixation,
    Saccade,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Fixation => "fixation",
            SegmentKind::Saccade => "saccade",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// First sample, inclusive.
    pub start_idx: usize,
    /// One past the last sample.
    pub end_idx: usize,
    pub duration_s: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_idx - self.start_idx
    }

    pub fn is_empty(&self) -> bool {
        self.end_idx == self.start_idx
    }
}

/// Borrowed samples of one segment.
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a> {
    pub t: &'a [f64],
    pub x: &'a [f64],
    pub y: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedTrajectory {
    pub trajectory: Trajectory,
    pub config: IvtConfig,
    pub segments: Vec<Segment>,
}

impl SegmentedTrajectory {
    /// The samples a segment owns.
    pub fn samples(&self, seg: &Segment) -> SegmentView<'_> {
        self.view(seg.start_idx, seg.end_idx)
    }

    /// The samples spanned by the segment's intervals: its own samples plus
    /// the first sample of the following segment. Kinematic features are
    /// computed over this window so that every velocity in it belongs to the
    /// segment.
    pub fn kinematic_window(&self, seg: &Segment) -> SegmentView<'_> {
        let end = (seg.end_idx + 1).min(self.trajectory.len());
        self.view(seg.start_idx, end)
    }

    fn view(&self, start: usize, end: usize) -> SegmentView<'_> {
        let tr = &self.trajectory;
        SegmentView {
            t: &tr.t()[start..end],
            x: &tr.x()[start..end],
            y: &tr.y()[start..end],
        }
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    pub fn fixations(&self) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Fixation)
    }

    pub fn saccades(&self) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Saccade)
    }
}

/// Point-to-point speed in deg/s, one value per interval.
pub fn angular_velocity(traj: &Trajectory) -> Vec<f64> {
    let (x, y, rate) = (traj.x(), traj.y(), traj.rate_hz());
    (0..traj.len() - 1)
        .map(|i| {
            let dx = x[i + 1] - x[i];
            let dy = y[i + 1] - y[i];
            (dx * dx + dy * dy).sqrt() * rate
        })
        .collect()
}

/// Classifies interval velocities into segments.
///
/// Maximal runs with `v < vt` lasting at least `mfd` become fixations;
/// everything else is merged into maximal saccades.
pub fn segment_velocities(velocity: &[f64], rate_hz: f64, cfg: &IvtConfig) -> Vec<Segment> {
    let n_intervals = velocity.len();
    let mut segments: Vec<Segment> = Vec::new();
    let mut push = |kind: SegmentKind, start: usize, end: usize| {
        if let Some(last) = segments.last_mut() {
            if last.kind == SegmentKind::Saccade && kind == SegmentKind::Saccade {
                last.end_idx = end;
                return;
            }
        }
        segments.push(Segment {
            kind,
            start_idx: start,
            end_idx: end,
            duration_s: 0.0,
        });
    };

    let mut i = 0;
    while i < n_intervals {
        let low = velocity[i] < cfg.vt_deg_per_s;
        let mut j = i + 1;
        while j < n_intervals && (velocity[j] < cfg.vt_deg_per_s) == low {
            j += 1;
        }
        let kind = if low && (j - i) as f64 / rate_hz >= cfg.mfd_s {
            SegmentKind::Fixation
        } else {
            SegmentKind::Saccade
        };
        push(kind, i, j);
        i = j;
    }

    if let Some(last) = segments.last_mut() {
        last.end_idx = n_intervals + 1;
    }
    for seg in &mut segments {
        seg.duration_s = (seg.end_idx - seg.start_idx) as f64 / rate_hz;
    }
    segments
}

pub fn ivt_segment(traj: &Trajectory, cfg: &IvtConfig) -> Result<SegmentedTrajectory> {
    cfg.validate()?;
    if traj.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: traj.len(),
        });
    }
    let velocity = angular_velocity(traj);
    Ok(SegmentedTrajectory {
        trajectory: traj.clone(),
        config: *cfg,
        segments: segment_velocities(&velocity, traj.rate_hz(), cfg),
    })
}

/// Writes the `kind,start_idx,end_idx,duration_s` debug dump.
pub fn write_segments_csv<W: Write>(mut w: W, segments: &[Segment]) -> io::Result<()> {
    writeln!(w, "kind,start_idx,end_idx,duration_s")?;
    for s in segments {
        writeln!(
            w,
            "{},{},{},{}",
            s.kind, s.start_idx, s.end_idx, s.duration_s
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtPoint {
    pub vt_deg_per_s: f64,
    pub mean_fixations: f64,
}

/// The default threshold grid, 1..=150 deg/s.
pub fn default_vt_grid() -> Vec<f64> {
    (1..=150).map(f64::from).collect()
}

/// Mean fixation count per user for each threshold.
///
/// Counts are summed over a user's sessions, then averaged over users.
/// Recordings are smoothed first when `sg` is given.
pub fn vt_sweep(
    dataset: &Dataset,
    vt_values: &[f64],
    mfd_s: f64,
    sg: Option<&SgConfig>,
) -> Result<Vec<VtPoint>> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData(
            "vt sweep needs a non-empty dataset".into(),
        ));
    }
    for &vt in vt_values {
        IvtConfig::new(vt, mfd_s)?;
    }
    let mut velocities: Vec<((&str, &str), f64, Vec<f64>)> = Vec::new();
    for r in dataset.recordings() {
        let traj = match sg {
            Some(cfg) => smooth(&r.trajectory, cfg)?,
            None => r.trajectory.clone(),
        };
        velocities.push((
            (r.dataset_id.as_str(), r.user_id.as_str()),
            traj.rate_hz(),
            angular_velocity(&traj),
        ));
    }
    let n_users = velocities
        .iter()
        .map(|(user, _, _)| *user)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(vt_values
        .par_iter()
        .map(|&vt| {
            let cfg = IvtConfig {
                vt_deg_per_s: vt,
                mfd_s,
            };
            let mut per_user: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for (user, rate, v) in &velocities {
                let count = segment_velocities(v, *rate, &cfg)
                    .iter()
                    .filter(|s| s.kind == SegmentKind::Fixation)
                    .count();
                *per_user.entry(*user).or_default() += count;
            }
            VtPoint {
                vt_deg_per_s: vt,
                mean_fixations: per_user.values().sum::<usize>() as f64 / n_users as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_velocity_steps(rate: f64, steps: &[f64]) -> Trajectory {
        let mut x = vec![0.0];
        for s in steps {
            let last = *x.last().unwrap();
            x.push(last + s / rate);
        }
        let n = x.len();
        Trajectory::uniform(rate, x, vec![0.0; n]).unwrap()
    }

    #[test]
    fn velocity_of_linear_motion() {
        let traj = Trajectory::uniform(
            200.0,
            (0..10).map(|i| 0.1 * i as f64).collect(),
            vec![0.0; 10],
        )
        .unwrap();
        for v in angular_velocity(&traj) {
            assert!((v - 20.0).abs() < 1e-9);
        }
        let diag = Trajectory::uniform(200.0, vec![0.0, 0.3], vec![0.0, 0.4]).unwrap();
        assert!((angular_velocity(&diag)[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_is_one_fixation() {
        let traj = Trajectory::uniform(200.0, vec![1.0; 200], vec![2.0; 200]).unwrap();
        let seg = ivt_segment(&traj, &IvtConfig::default()).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(seg.segments[0].kind, SegmentKind::Fixation);
        assert_eq!(
            (seg.segments[0].start_idx, seg.segments[0].end_idx),
            (0, 200)
        );
    }

    #[test]
    fn short_stationary_run_becomes_saccade() {
        // 50 ms of rest is below the 96 ms minimum.
        let traj = Trajectory::uniform(200.0, vec![0.0; 11], vec![0.0; 11]).unwrap();
        let seg = ivt_segment(&traj, &IvtConfig::default()).unwrap();
        assert_eq!(seg.segments.len(), 1);
        assert_eq!(seg.segments[0].kind, SegmentKind::Saccade);
    }

    #[test]
    fn velocity_exactly_at_threshold_is_high() {
        let mut steps = vec![0.0; 30];
        steps.extend([90.0; 3]);
        steps.extend([0.0; 30]);
        let traj = from_velocity_steps(200.0, &steps);
        let seg = ivt_segment(&traj, &IvtConfig::default()).unwrap();
        let kinds: Vec<_> = seg.segments.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::Fixation,
                SegmentKind::Saccade,
                SegmentKind::Fixation
            ]
        );
        assert_eq!(seg.segments[1].len(), 3);
    }

    #[test]
    fn segment_dump_format() {
        let segs = vec![Segment {
            kind: SegmentKind::Fixation,
            start_idx: 0,
            end_idx: 20,
            duration_s: 0.1,
        }];
        let mut buf = Vec::new();
        write_segments_csv(&mut buf, &segs).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,start_idx,end_idx,duration_s\nfixation,0,20,0.1\n"
        );
    }

    #[test]
    fn sweep_rejects_empty_dataset() {
        let ds = Dataset::new(vec![], crate::data::Manifest::new(200.0, "test")).unwrap();
        assert!(vt_sweep(&ds, &[90.0], 0.096, None).is_err());
    }
}
