//! Python bindings: configs, trajectories, datasets, segmentation, features,
//! RBFN models and the identification experiment.

use gaze_ident::evaluation::{
    derivative_sweep as core_sweep, run_experiment as core_run, segment_recording,
};
use gaze_ident::features::extract_features;
use gaze_ident::rbfn::{rbfn_predict_proba, rbfn_train};
use gaze_ident::{
    analysis, synthgen, Anchor, Dataset, DerivativeLevel, Error, ExperimentConfig,
    ExperimentResult, FeatureMatrix, Fragment, IvtConfig, RbfnConfig, RbfnModel, Segment, Session,
    SgConfig, SynthConfig, Trajectory,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for gaze_ident::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn level(n: u8) -> PyResult<DerivativeLevel> {
    DerivativeLevel::new(n).py()
}

fn anchor(s: &str) -> PyResult<Anchor> {
    s.parse().py()
}

fn session(s: &str) -> PyResult<Session> {
    s.parse().py()
}

/// Savitzky-Golay smoothing parameters.
#[pyclass(
    name = "SgConfig",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PySgConfig {
    inner: SgConfig,
}

#[pymethods]
impl PySgConfig {
    #[new]
    #[pyo3(signature = (poly_order = 6, frame_size = 15))]
    fn new(poly_order: usize, frame_size: usize) -> PyResult<Self> {
        Ok(Self {
            inner: SgConfig::new(poly_order, frame_size).py()?,
        })
    }

    #[getter]
    fn poly_order(&self) -> usize {
        self.inner.poly_order
    }

    #[getter]
    fn frame_size(&self) -> usize {
        self.inner.frame_size
    }

    fn __repr__(&self) -> String {
        format!(
            "SgConfig(poly_order={}, frame_size={})",
            self.inner.poly_order, self.inner.frame_size
        )
    }
}

/// Velocity-threshold segmentation parameters.
#[pyclass(
    name = "IvtConfig",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyIvtConfig {
    inner: IvtConfig,
}

#[pymethods]
impl PyIvtConfig {
    #[new]
    #[pyo3(signature = (vt_deg_per_s = 90.0, mfd_s = 0.096))]
    fn new(vt_deg_per_s: f64, mfd_s: f64) -> PyResult<Self> {
        Ok(Self {
            inner: IvtConfig::new(vt_deg_per_s, mfd_s).py()?,
        })
    }

    #[getter]
    fn vt_deg_per_s(&self) -> f64 {
        self.inner.vt_deg_per_s
    }

    #[getter]
    fn mfd_s(&self) -> f64 {
        self.inner.mfd_s
    }

    fn __repr__(&self) -> String {
        format!(
            "IvtConfig(vt_deg_per_s={}, mfd_s={})",
            self.inner.vt_deg_per_s, self.inner.mfd_s
        )
    }
}

/// RBFN hyper-parameters.
#[pyclass(
    name = "RbfnConfig",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyRbfnConfig {
    inner: RbfnConfig,
}

#[pymethods]
impl PyRbfnConfig {
    #[new]
    #[pyo3(signature = (k = 32, seed = 0, ridge_lambda = 1e-6, kmeans_max_iters = 100))]
    fn new(k: usize, seed: u64, ridge_lambda: f64, kmeans_max_iters: usize) -> Self {
        Self {
            inner: RbfnConfig {
                k,
                seed,
                ridge_lambda,
                kmeans_max_iters,
            },
        }
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn ridge_lambda(&self) -> f64 {
        self.inner.ridge_lambda
    }

    #[getter]
    fn kmeans_max_iters(&self) -> usize {
        self.inner.kmeans_max_iters
    }
}

/// A uniformly sampled gaze trajectory in degrees.
#[pyclass(
    name = "Trajectory",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    /// Timestamps default to `i / rate_hz`.
    #[new]
    #[pyo3(signature = (rate_hz, x, y, t = None))]
    fn new(rate_hz: f64, x: Vec<f64>, y: Vec<f64>, t: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = match t {
            Some(t) => Trajectory::new(rate_hz, t, x, y),
            None => Trajectory::uniform(rate_hz, x, y),
        }
        .py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn rate_hz(&self) -> f64 {
        self.inner.rate_hz()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.t().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Savitzky-Golay smoothed copy.
    #[pyo3(signature = (config = None))]
    fn smooth(&self, config: Option<&PySgConfig>) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        Ok(Self {
            inner: gaze_ident::preprocess::smooth(&self.inner, &cfg).py()?,
        })
    }

    /// Downsampled copy at `rate_hz`.
    fn resample(&self, rate_hz: f64) -> PyResult<Self> {
        Ok(Self {
            inner: gaze_ident::resample(&self.inner, rate_hz).py()?,
        })
    }

    /// The first or last `duration_s` seconds, with time re-based to zero.
    #[pyo3(signature = (duration_s, anchor = "start"))]
    fn fragment(&self, duration_s: f64, anchor: &str) -> PyResult<Self> {
        Ok(Self {
            inner: gaze_ident::cut_fragment(&self.inner, duration_s, self::anchor(anchor)?).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(rate_hz={}, samples={})",
            self.inner.rate_hz(),
            self.inner.len()
        )
    }
}

/// One fixation or saccade; `end_idx` is exclusive.
#[pyclass(
    name = "Segment",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PySegment {
    inner: Segment,
}

#[pymethods]
impl PySegment {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.as_str()
    }

    #[getter]
    fn start_idx(&self) -> usize {
        self.inner.start_idx
    }

    #[getter]
    fn end_idx(&self) -> usize {
        self.inner.end_idx
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Segment({}, {}..{}, {} s)",
            self.inner.kind, self.inner.start_idx, self.inner.end_idx, self.inner.duration_s
        )
    }
}

/// Paired S1/S2 recordings for a set of users.
#[pyclass(
    name = "Dataset",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn rate_hz(&self) -> f64 {
        self.inner.manifest().rate_hz
    }

    fn users(&self) -> Vec<String> {
        self.inner.users().into_iter().map(String::from).collect()
    }

    fn dataset_ids(&self) -> Vec<String> {
        self.inner
            .dataset_ids()
            .into_iter()
            .map(String::from)
            .collect()
    }

    /// The trajectory of `user` in session "S1" or "S2".
    fn trajectory(&self, user: &str, session: &str) -> PyResult<PyTrajectory> {
        let s = self::session(session)?;
        self.inner
            .recording(user, s)
            .map(|r| PyTrajectory {
                inner: r.trajectory.clone(),
            })
            .ok_or_else(|| PyValueError::new_err(format!("no recording for {user} {session}")))
    }

    fn select(&self, dataset_id: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.select(dataset_id).py()?,
        })
    }

    fn resample(&self, rate_hz: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self
                .inner
                .map_trajectories(|t| gaze_ident::resample(t, rate_hz))
                .py()?,
        })
    }

    #[pyo3(signature = (root, force = false))]
    fn write(&self, root: std::path::PathBuf, force: bool) -> PyResult<()> {
        gaze_ident::write_dataset(&self.inner, root, force).py()
    }

    fn __len__(&self) -> usize {
        self.inner.recordings().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(users={}, recordings={}, rate_hz={})",
            self.inner.users().len(),
            self.inner.recordings().len(),
            self.inner.manifest().rate_hz
        )
    }
}

/// Feature rows of one segment kind with one user label per row.
#[pyclass(
    name = "FeatureMatrix",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyFeatureMatrix {
    inner: FeatureMatrix,
}

#[pymethods]
impl PyFeatureMatrix {
    #[new]
    #[pyo3(signature = (rows, labels, kind = "fixation", level = 5))]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<String>, kind: &str, level: u8) -> PyResult<Self> {
        let kind = match kind {
            "fixation" => gaze_ident::SegmentKind::Fixation,
            "saccade" => gaze_ident::SegmentKind::Saccade,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown segment kind {other:?}"
                )))
            }
        };
        Ok(Self {
            inner: FeatureMatrix::from_rows(kind, self::level(level)?, rows, labels).py()?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn level(&self) -> u8 {
        self.inner.level().get()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.n_cols() {
            return Err(PyValueError::new_err(format!(
                "column {j} out of range ({} columns)",
                self.inner.n_cols()
            )));
        }
        Ok(self.inner.column(j))
    }

    fn feature_names(&self) -> Vec<String> {
        gaze_ident::features::feature_names(self.inner.level())
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }
}

/// A trained RBF network over user classes.
#[pyclass(
    name = "RbfnModel",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyRbfnModel {
    inner: RbfnModel,
}

#[pymethods]
impl PyRbfnModel {
    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn widths(&self) -> Vec<f64> {
        self.inner.widths.clone()
    }

    /// Class probabilities for one feature row (sums to 1).
    fn predict_proba(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        rbfn_predict_proba(&self.inner, &x).py()
    }

    /// The most probable class; ties go to the first class.
    fn predict(&self, x: Vec<f64>) -> PyResult<String> {
        let p = rbfn_predict_proba(&self.inner, &x).py()?;
        Ok(self.inner.classes[gaze_ident::rbfn::argmax(&p)].clone())
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RbfnModel::from_json(text).py()?,
        })
    }
}

/// Per-seed accuracies of the identification experiment, in percent.
#[pyclass(
    name = "ExperimentResult",
    module = "gaze_ident_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyExperimentResult {
    inner: ExperimentResult,
}

#[pymethods]
impl PyExperimentResult {
    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }

    #[getter]
    fn sd(&self) -> f64 {
        self.inner.sd
    }

    #[getter]
    fn accuracies(&self) -> Vec<f64> {
        self.inner.accuracies.clone()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.config.seeds.clone()
    }

    /// The full result, configuration included, as JSON.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentResult({:.2} ± {:.2})",
            self.inner.mean, self.inner.sd
        )
    }
}

#[pyfunction]
fn load_dataset(root: std::path::PathBuf) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: gaze_ident::load_dataset(root).py()?,
    })
}

/// Seeded synthetic dataset with two sessions per user.
#[pyfunction]
#[pyo3(signature = (n_users = 10, duration_s = 200.0, seed = 0, rate_hz = 200.0, noise = 0.02, dataset_id = "SYN"))]
fn generate_synthetic(
    n_users: usize,
    duration_s: f64,
    seed: u64,
    rate_hz: f64,
    noise: f64,
    dataset_id: &str,
) -> PyResult<PyDataset> {
    let cfg = SynthConfig {
        n_users,
        duration_s,
        rate_hz,
        seed,
        session_noise_scale: noise,
        dataset_id: dataset_id.to_string(),
    };
    Ok(PyDataset {
        inner: synthgen::generate(&cfg).py()?,
    })
}

fn pipeline(
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
) -> (IvtConfig, Option<SgConfig>) {
    let ivt = ivt.map(|c| c.inner).unwrap_or_default();
    let sg = smooth.then(|| sg.map(|c| c.inner).unwrap_or_default());
    (ivt, sg)
}

/// Smooths (unless `smooth=False`) and segments a trajectory.
#[pyfunction]
#[pyo3(signature = (trajectory, ivt = None, sg = None, smooth = true))]
fn segment(
    trajectory: &PyTrajectory,
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
) -> PyResult<Vec<PySegment>> {
    let (ivt, sg) = pipeline(ivt, sg, smooth);
    let seg = segment_recording(&trajectory.inner, sg.as_ref(), None, &ivt).py()?;
    Ok(seg
        .segments
        .into_iter()
        .map(|inner| PySegment { inner })
        .collect())
}

/// Fixation and saccade feature matrices of one trajectory.
#[pyfunction]
#[pyo3(signature = (trajectory, label, level = 5, ivt = None, sg = None, smooth = true))]
fn extract(
    trajectory: &PyTrajectory,
    label: &str,
    level: u8,
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
) -> PyResult<(PyFeatureMatrix, PyFeatureMatrix)> {
    let (ivt, sg) = pipeline(ivt, sg, smooth);
    let seg = segment_recording(&trajectory.inner, sg.as_ref(), None, &ivt).py()?;
    let (fix, sac) = extract_features(&seg, self::level(level)?, label);
    Ok((
        PyFeatureMatrix { inner: fix },
        PyFeatureMatrix { inner: sac },
    ))
}

#[pyfunction]
#[pyo3(signature = (features, config = None))]
fn train_rbfn(features: &PyFeatureMatrix, config: Option<&PyRbfnConfig>) -> PyResult<PyRbfnModel> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    Ok(PyRbfnModel {
        inner: rbfn_train(&features.inner, &cfg).py()?,
    })
}

#[allow(clippy::too_many_arguments)]
fn experiment_config(
    level: u8,
    seeds: Option<Vec<u64>>,
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
    rbfn: Option<&PyRbfnConfig>,
    fragment_s: Option<f64>,
    anchor: &str,
) -> PyResult<ExperimentConfig> {
    let (ivt, sg) = pipeline(ivt, sg, smooth);
    let fragment = match fragment_s {
        Some(duration_s) => Some(Fragment {
            duration_s,
            anchor: self::anchor(anchor)?,
        }),
        None => None,
    };
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        level: self::level(level)?,
        fragment,
        seeds: seeds.unwrap_or(defaults.seeds),
        ivt,
        sg,
        rbfn: rbfn.map(|c| c.inner).unwrap_or_default(),
    };
    cfg.validate().py()?;
    Ok(cfg)
}

/// Trains on S1, identifies S2, once per seed (default seeds 0..=49).
#[pyfunction]
#[pyo3(signature = (dataset, level = 5, seeds = None, ivt = None, sg = None, smooth = true, rbfn = None, fragment_s = None, anchor = "start"))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    dataset: &PyDataset,
    level: u8,
    seeds: Option<Vec<u64>>,
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
    rbfn: Option<&PyRbfnConfig>,
    fragment_s: Option<f64>,
    anchor: &str,
) -> PyResult<PyExperimentResult> {
    let cfg = experiment_config(level, seeds, ivt, sg, smooth, rbfn, fragment_s, anchor)?;
    let ds = dataset.inner.clone();
    let inner = py.detach(move || core_run(&ds, &cfg)).py()?;
    Ok(PyExperimentResult { inner })
}

/// `(level, n_features, result)` for every derivative level 0..=5.
#[pyfunction]
#[pyo3(signature = (dataset, seeds = None, ivt = None, sg = None, smooth = true, rbfn = None, fragment_s = None, anchor = "start"))]
#[allow(clippy::too_many_arguments)]
fn derivative_sweep(
    py: Python<'_>,
    dataset: &PyDataset,
    seeds: Option<Vec<u64>>,
    ivt: Option<&PyIvtConfig>,
    sg: Option<&PySgConfig>,
    smooth: bool,
    rbfn: Option<&PyRbfnConfig>,
    fragment_s: Option<f64>,
    anchor: &str,
) -> PyResult<Vec<(u8, usize, PyExperimentResult)>> {
    let cfg = experiment_config(5, seeds, ivt, sg, smooth, rbfn, fragment_s, anchor)?;
    let ds = dataset.inner.clone();
    let rows = py.detach(move || core_sweep(&ds, &cfg)).py()?;
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r.level.get(),
                r.n_features,
                PyExperimentResult { inner: r.result },
            )
        })
        .collect())
}

/// One-way ANOVA F statistic of `values` grouped by `groups`.
#[pyfunction]
fn anova_f(values: Vec<f64>, groups: Vec<String>) -> PyResult<f64> {
    analysis::anova_f(&values, &groups).py()
}

#[pymodule]
fn gaze_ident_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySgConfig>()?;
    m.add_class::<PyIvtConfig>()?;
    m.add_class::<PyRbfnConfig>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PySegment>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFeatureMatrix>()?;
    m.add_class::<PyRbfnModel>()?;
    m.add_class::<PyExperimentResult>()?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(train_rbfn, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(anova_f, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsers() {
        assert_eq!(level(3).unwrap().get(), 3);
        assert!(level(6).is_err());
        assert_eq!(anchor("end").unwrap(), Anchor::End);
        assert_eq!(session("S2").unwrap(), Session::S2);
        assert!(session("S3").is_err());
    }
}
