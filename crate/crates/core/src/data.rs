//! Gaze recordings: the in-memory model, the on-disk layout, fragment cutting
//! and rational-ratio resampling.
//!
//! On disk a dataset is a directory:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<dataset_id>/<user_id>/<session_id>.csv      (header `t,x,y`)
//! ```
//!
//! Positions are degrees of visual angle; `manifest.json` must declare
//! `"units": "deg"`. A `ground_truth/` directory at the root (written by the
//! synthetic generator) is ignored by the loader.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the sample step when checking uniform sampling.
pub const UNIFORM_STEP_RTOL: f64 = 1e-9;

/// Directory name at the dataset root that the loader skips.
pub const GROUND_TRUTH_DIR: &str = "ground_truth";

pub const MANIFEST_FILE: &str = "manifest.json";

/// Largest numerator/denominator accepted for a resampling ratio.
pub const MAX_RATIO_TERM: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Seconds from recording start.
    pub t: f64,
    /// Horizontal gaze position, degrees.
    pub x: f64,
    /// Vertical gaze position, degrees.
    pub y: f64,
}

/// A uniformly sampled 2-D gaze signal.
///
/// Stored column-wise; every constructor validates the invariants (finite
/// values, `t >= 0`, strictly increasing time with step `1/rate_hz`, at least
/// two samples).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    rate_hz: f64,
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Trajectory {
    pub fn new(rate_hz: f64, t: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new_with_context(rate_hz, t, x, y, "trajectory")
    }

    fn new_with_context(
        rate_hz: f64,
        t: Vec<f64>,
        x: Vec<f64>,
        y: Vec<f64>,
        context: &str,
    ) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidTrajectory(format!(
                "{context}: rate_hz must be positive, got {rate_hz}"
            )));
        }
        if t.len() != x.len() || t.len() != y.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{context}: column lengths differ (t={}, x={}, y={})",
                t.len(),
                x.len(),
                y.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: t.len(),
            });
        }
        for i in 0..t.len() {
            if !(t[i].is_finite() && t[i] >= 0.0) {
                return Err(Error::InvalidTrajectory(format!(
                    "{context}: sample {i} has invalid time {}",
                    t[i]
                )));
            }
            if !(x[i].is_finite() && y[i].is_finite()) {
                return Err(Error::InvalidTrajectory(format!(
                    "{context}: sample {i} has non-finite position"
                )));
            }
        }
        let expected = 1.0 / rate_hz;
        for i in 1..t.len() {
            let step = t[i] - t[i - 1];
            if (step - expected).abs() > UNIFORM_STEP_RTOL * expected {
                return Err(Error::NonUniformSampling {
                    context: context.to_string(),
                    index: i,
                    step,
                    expected,
                });
            }
        }
        Ok(Self { rate_hz, t, x, y })
    }

    /// Builds a trajectory with timestamps `i / rate_hz`.
    pub fn uniform(rate_hz: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let t = (0..x.len()).map(|i| i as f64 / rate_hz).collect();
        Self::new(rate_hz, t, x, y)
    }

    pub fn from_samples(rate_hz: f64, samples: &[GazeSample]) -> Result<Self> {
        Self::new(
            rate_hz,
            samples.iter().map(|s| s.t).collect(),
            samples.iter().map(|s| s.x).collect(),
            samples.iter().map(|s| s.y).collect(),
        )
    }

    /// Replaces the positions while keeping the time base. Lengths must match.
    pub fn with_positions(&self, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(self.rate_hz, self.t.clone(), x, y)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sample(&self, i: usize) -> GazeSample {
        GazeSample {
            t: self.t[i],
            x: self.x[i],
            y: self.y[i],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = GazeSample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Recording length in seconds, `len / rate_hz`.
    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    fn slice_rebased(&self, start: usize, end: usize) -> Self {
        Self {
            rate_hz: self.rate_hz,
            t: (0..end - start).map(|i| i as f64 / self.rate_hz).collect(),
            x: self.x[start..end].to_vec(),
            y: self.y[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    S1,
    S2,
}

impl Session {
    pub const ALL: [Session; 2] = [Session::S1, Session::S2];

    pub fn as_str(self) -> &'static str {
        match self {
            Session::S1 => "S1",
            Session::S2 => "S2",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(Session::S1),
            "S2" => Ok(Session::S2),
            other => Err(Error::InvalidConfig(format!(
                "unknown session id {other:?} (expected S1 or S2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub user_id: String,
    pub dataset_id: String,
    pub session: Session,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rate_hz: f64,
    pub units: String,
    pub source: String,
    /// Any further metadata keys are carried through unchanged.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(rate_hz: f64, source: impl Into<String>) -> Self {
        Self {
            rate_hz,
            units: "deg".to_string(),
            source: source.into(),
            extra: BTreeMap::new(),
        }
    }
}

/// A validated collection of recordings.
///
/// Recordings are kept sorted by `(dataset_id, user_id, session)`; every
/// `(dataset_id, user_id)` has both sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    recordings: Vec<Recording>,
    manifest: Manifest,
}

impl Dataset {
    pub fn new(mut recordings: Vec<Recording>, manifest: Manifest) -> Result<Self> {
        recordings.sort_by(|a, b| {
            (&a.dataset_id, &a.user_id, a.session).cmp(&(&b.dataset_id, &b.user_id, b.session))
        });
        for pair in recordings.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.dataset_id == b.dataset_id && a.user_id == b.user_id && a.session == b.session {
                return Err(Error::InvalidConfig(format!(
                    "duplicate recording {}/{}/{}",
                    a.dataset_id, a.user_id, a.session
                )));
            }
        }
        let mut sessions: BTreeMap<(&str, &str), BTreeSet<Session>> = BTreeMap::new();
        for r in &recordings {
            sessions
                .entry((r.dataset_id.as_str(), r.user_id.as_str()))
                .or_default()
                .insert(r.session);
        }
        for ((dataset_id, user_id), present) in &sessions {
            if let Some(missing) = Session::ALL.iter().find(|s| !present.contains(s)) {
                return Err(Error::Unpaired {
                    dataset_id: dataset_id.to_string(),
                    user_id: user_id.to_string(),
                    missing: missing.to_string(),
                });
            }
        }
        Ok(Self {
            recordings,
            manifest,
        })
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn dataset_ids(&self) -> Vec<&str> {
        let ids: BTreeSet<&str> = self
            .recordings
            .iter()
            .map(|r| r.dataset_id.as_str())
            .collect();
        ids.into_iter().collect()
    }

    /// Sorted distinct user ids across all dataset ids.
    pub fn users(&self) -> Vec<&str> {
        let ids: BTreeSet<&str> = self.recordings.iter().map(|r| r.user_id.as_str()).collect();
        ids.into_iter().collect()
    }

    pub fn recording(&self, user_id: &str, session: Session) -> Option<&Recording> {
        self.recordings
            .iter()
            .find(|r| r.user_id == user_id && r.session == session)
    }

    /// Restricts the dataset to one dataset id.
    pub fn select(&self, dataset_id: &str) -> Result<Self> {
        let recordings: Vec<Recording> = self
            .recordings
            .iter()
            .filter(|r| r.dataset_id == dataset_id)
            .cloned()
            .collect();
        if recordings.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "dataset id {dataset_id:?} not present"
            )));
        }
        Self::new(recordings, self.manifest.clone())
    }

    /// Fails unless exactly one dataset id is present; experiments need this
    /// so user ids are unambiguous.
    pub fn require_single_id(&self) -> Result<&str> {
        let ids = self.dataset_ids();
        match ids.as_slice() {
            [] => Err(Error::InsufficientData("dataset is empty".into())),
            [one] => Ok(one),
            many => Err(Error::InvalidConfig(format!(
                "dataset holds several dataset ids ({}); select one",
                many.join(", ")
            ))),
        }
    }

    /// Applies `f` to every trajectory, keeping identities.
    pub fn map_trajectories<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&Trajectory) -> Result<Trajectory>,
    {
        let mut recordings = Vec::with_capacity(self.recordings.len());
        for r in &self.recordings {
            recordings.push(Recording {
                trajectory: f(&r.trajectory)?,
                ..r.clone()
            });
        }
        let mut manifest = self.manifest.clone();
        if let Some(r) = recordings.first() {
            manifest.rate_hz = r.trajectory.rate_hz();
        }
        Self::new(recordings, manifest)
    }
}

fn recording_path(root: &Path, r: &Recording) -> PathBuf {
    root.join(&r.dataset_id)
        .join(&r.user_id)
        .join(format!("{}.csv", r.session))
}

/// Reads and validates a dataset directory.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        message: format!("cannot read: {e}"),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    if manifest.units != "deg" {
        return Err(Error::Manifest {
            path: manifest_path,
            message: format!("units must be \"deg\", got {:?}", manifest.units),
        });
    }
    if !(manifest.rate_hz.is_finite() && manifest.rate_hz > 0.0) {
        return Err(Error::Manifest {
            path: manifest_path,
            message: format!("rate_hz must be positive, got {}", manifest.rate_hz),
        });
    }

    let mut recordings = Vec::new();
    for dataset_dir in sorted_dirs(root)? {
        let dataset_id = file_name(&dataset_dir);
        if dataset_id == GROUND_TRUTH_DIR {
            continue;
        }
        for user_dir in sorted_dirs(&dataset_dir)? {
            let user_id = file_name(&user_dir);
            for entry in sorted_entries(&user_dir)? {
                if !entry.is_file() || entry.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                let stem = entry
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default();
                let session: Session = stem.parse().map_err(|_| Error::Csv {
                    path: entry.clone(),
                    line: 0,
                    message: format!("file name must be S1.csv or S2.csv, got {stem}.csv"),
                })?;
                let trajectory = read_trajectory_csv(&entry, manifest.rate_hz)?;
                recordings.push(Recording {
                    user_id: user_id.clone(),
                    dataset_id: dataset_id.clone(),
                    session,
                    trajectory,
                });
            }
        }
    }
    Dataset::new(recordings, manifest)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect())
}

/// Parses one `t,x,y` CSV file and validates it against `rate_hz`.
pub fn read_trajectory_csv(path: &Path, rate_hz: f64) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == "t,x,y" => {}
        Some((_, header)) => {
            return Err(csv_err(
                1,
                format!("header must be `t,x,y`, got {header:?}"),
            ))
        }
        None => return Err(csv_err(1, "empty file".into())),
    }
    let (mut t, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    let mut saw_blank = false;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            saw_blank = true;
            continue;
        }
        if saw_blank {
            return Err(csv_err(line_no - 1, "blank line inside data".into()));
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let field = fields
                .next()
                .ok_or_else(|| csv_err(line_no, format!("missing column {name}")))?;
            field
                .parse::<f64>()
                .map_err(|_| csv_err(line_no, format!("column {name}: cannot parse {field:?}")))
        };
        let (tv, xv, yv) = (next("t")?, next("x")?, next("y")?);
        if fields.next().is_some() {
            return Err(csv_err(line_no, "more than three columns".into()));
        }
        t.push(tv);
        x.push(xv);
        y.push(yv);
    }
    Trajectory::new_with_context(rate_hz, t, x, y, &path.display().to_string())
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(b"t,x,y\n").map_err(io)?;
    for s in traj.samples() {
        // `{}` on f64 prints the shortest representation that parses back exactly.
        writeln!(w, "{},{},{}", s.t, s.x, s.y).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `dataset` in the on-disk layout understood by [`load_dataset`].
///
/// Refuses to write into an existing non-empty directory unless `force`.
pub fn write_dataset(dataset: &Dataset, root: impl AsRef<Path>, force: bool) -> Result<()> {
    let root = root.as_ref();
    if root.exists() {
        let non_empty = fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::OutputExists(root.to_path_buf()));
        }
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let manifest_path = root.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(dataset.manifest())?;
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    for r in dataset.recordings() {
        let path = recording_path(root, r);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_trajectory_csv(&path, &r.trajectory)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Start,
    End,
}

impl Anchor {
    pub fn as_str(self) -> &'static str {
        match self {
            Anchor::Start => "start",
            Anchor::End => "end",
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "start" | "begin" => Ok(Anchor::Start),
            "end" => Ok(Anchor::End),
            other => Err(Error::InvalidConfig(format!(
                "unknown anchor {other:?} (expected start or end)"
            ))),
        }
    }
}

/// Number of samples in a fragment: `floor(duration * rate)`, with a small
/// guard so products like `0.29 * 100` do not round down to 28.
pub fn fragment_len(duration_s: f64, rate_hz: f64) -> usize {
    let n = duration_s * rate_hz;
    (n + n.abs() * 1e-12).floor() as usize
}

/// Cuts `duration_s` seconds from the start or end of `traj`, re-basing time
/// to zero. Requests longer than the trajectory return all of it.
pub fn cut_fragment(traj: &Trajectory, duration_s: f64, anchor: Anchor) -> Result<Trajectory> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "fragment duration must be positive, got {duration_s}"
        )));
    }
    let total = traj.len();
    let n = fragment_len(duration_s, traj.rate_hz()).max(2).min(total);
    let (start, end) = match anchor {
        Anchor::Start => (0, n),
        Anchor::End => (total - n, total),
    };
    Ok(traj.slice_rebased(start, end))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Finds `(up, down)` with `target / source == up / down` and both terms at most
/// [`MAX_RATIO_TERM`].
pub fn rational_ratio(source_hz: f64, target_hz: f64) -> Result<(u64, u64)> {
    if !(source_hz.is_finite() && source_hz > 0.0 && target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::UnsupportedRatio(format!(
            "rates must be positive (source {source_hz}, target {target_hz})"
        )));
    }
    if target_hz > source_hz {
        return Err(Error::UnsupportedRatio(format!(
            "target rate {target_hz} Hz exceeds source rate {source_hz} Hz (downsampling only)"
        )));
    }
    let ratio = target_hz / source_hz;
    for down in 1..=MAX_RATIO_TERM {
        let up = (ratio * down as f64).round() as u64;
        if up == 0 || up > MAX_RATIO_TERM {
            continue;
        }
        if (source_hz * up as f64 / down as f64 - target_hz).abs() <= 1e-9 * target_hz {
            let g = gcd(up, down);
            return Ok((up / g, down / g));
        }
    }
    Err(Error::UnsupportedRatio(format!(
        "{source_hz} Hz -> {target_hz} Hz is not a ratio of integers <= {MAX_RATIO_TERM}"
    )))
}

/// Low-pass prototype for an `up`/`down` polyphase resampler: Hamming-windowed
/// sinc with cutoff `pi / max(up, down)` and `8 * max(up, down) + 1` taps.
///
/// Taps are scaled so each of the `up` polyphase branches sums to one, which
/// gives every output sample unit DC gain.
pub fn resampling_filter(up: u64, down: u64) -> Vec<f64> {
    let factor = up.max(down) as usize;
    let n_taps = 8 * factor + 1;
    let center = (n_taps - 1) as f64 / 2.0;
    let cutoff = 1.0 / factor as f64;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|n| {
            let m = n as f64 - center;
            let sinc = if m == 0.0 {
                1.0
            } else {
                let a = std::f64::consts::PI * cutoff * m;
                a.sin() / a
            };
            let window =
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (n_taps - 1) as f64).cos();
            cutoff * sinc * window
        })
        .collect();
    let up = up as usize;
    for phase in 0..up {
        let sum: f64 = taps.iter().skip(phase).step_by(up).sum();
        for tap in taps.iter_mut().skip(phase).step_by(up) {
            *tap /= sum;
        }
    }
    taps
}

/// Mirror index into `0..n` (reflection about the edge samples).
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut r = i.rem_euclid(period);
    if r >= n as i64 {
        r = period - r;
    }
    r as usize
}

fn resample_channel(
    signal: &[f64],
    up: usize,
    down: usize,
    taps: &[f64],
    n_out: usize,
) -> Vec<f64> {
    let delay = (taps.len() - 1) / 2;
    (0..n_out)
        .map(|j| {
            let m = (j * down + delay) as i64;
            let phase = (m as usize) % up;
            let mut acc = 0.0;
            for k in (phase..taps.len()).step_by(up) {
                let input = (m - k as i64) / up as i64;
                acc += taps[k] * signal[reflect(input, signal.len())];
            }
            acc
        })
        .collect()
}

/// Downsamples `traj` to `target_rate_hz` with a rational polyphase resampler.
///
/// The filter delay is compensated so output sample `j` sits at time
/// `t[0] + j / target_rate_hz`; edges are mirror-padded.
pub fn resample(traj: &Trajectory, target_rate_hz: f64) -> Result<Trajectory> {
    let (up, down) = rational_ratio(traj.rate_hz(), target_rate_hz)?;
    if up == down {
        return Ok(traj.clone());
    }
    let taps = resampling_filter(up, down);
    let (up, down) = (up as usize, down as usize);
    let n_out = (traj.len() - 1) * up / down + 1;
    let x = resample_channel(traj.x(), up, down, &taps, n_out);
    let y = resample_channel(traj.y(), up, down, &taps, n_out);
    let t0 = traj.t()[0];
    let t = (0..n_out).map(|j| t0 + j as f64 / target_rate_hz).collect();
    Trajectory::new(target_rate_hz, t, x, y)
}
