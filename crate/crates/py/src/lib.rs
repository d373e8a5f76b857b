//! Python bindings for `mpscope`.

use std::path::PathBuf;

use mpscope::ingest::{self, Corpus};
use mpscope::inverse::{self, CountingMode, DetectionOptions};
use mpscope::model::{self, builtin_canonical_table, GestureId, Task};
use mpscope::pipeline::Analysis;
use mpscope::seqops;
use mpscope::stats::{self, Feature, GrsItem};
use mpscope::synth::{self, CorpusSpec};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn options(counting_mode: &str, exclude_canonical: bool) -> PyResult<DetectionOptions> {
    Ok(DetectionOptions {
        counting_mode: counting_mode.parse::<CountingMode>().map_err(value_err)?,
        exclude_canonical,
        ..DetectionOptions::default()
    })
}

#[pyclass(name = "MotionPrimitive", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyMotionPrimitive(model::MotionPrimitive);

#[pymethods]
impl PyMotionPrimitive {
    #[new]
    fn new(label: &str, start_frame: u32, end_frame: u32) -> PyResult<Self> {
        let sig: model::MpSignature = label.parse().map_err(value_err)?;
        model::MotionPrimitive::new(sig, start_frame, end_frame)
            .map(PyMotionPrimitive)
            .map_err(value_err)
    }

    #[getter]
    fn verb(&self) -> String {
        self.0.verb.to_string()
    }

    #[getter]
    fn actor(&self) -> String {
        self.0.actor.to_string()
    }

    #[getter]
    fn object(&self) -> String {
        self.0.object.to_string()
    }

    #[getter]
    fn start_frame(&self) -> u32 {
        self.0.start_frame
    }

    #[getter]
    fn end_frame(&self) -> u32 {
        self.0.end_frame
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn __repr__(&self) -> String {
        format!(
            "MotionPrimitive('{}', {}, {})",
            self.0.label(),
            self.0.start_frame,
            self.0.end_frame
        )
    }
}

#[pyclass(name = "InverseInstance", frozen)]
pub struct PyInverseInstance(model::InverseInstance);

#[pymethods]
impl PyInverseInstance {
    #[getter]
    fn type_label(&self) -> String {
        self.0.type_key.label()
    }

    #[getter]
    fn members(&self) -> Vec<PyMotionPrimitive> {
        self.0.members.iter().cloned().map(PyMotionPrimitive).collect()
    }

    #[getter]
    fn duration_frames(&self) -> u32 {
        self.0.duration_frames
    }

    #[getter]
    fn start_frame(&self) -> u32 {
        self.0.start_frame()
    }

    #[getter]
    fn end_frame(&self) -> u32 {
        self.0.end_frame()
    }

    #[getter]
    fn trial_id(&self) -> Option<String> {
        self.0.trial.as_ref().map(|t| t.trial_id.clone())
    }

    /// Attributed gesture, e.g. `"G6"`.
    #[getter]
    fn gesture(&self) -> Option<String> {
        self.0.gesture.as_ref().map(|g| g.gesture.to_string())
    }

    fn __repr__(&self) -> String {
        format!(
            "InverseInstance('{}', {}..{})",
            self.0.type_key,
            self.start_frame(),
            self.end_frame()
        )
    }
}

fn unwrap_mps(mps: &[PyMotionPrimitive]) -> Vec<model::MotionPrimitive> {
    mps.iter().map(|m| m.0.clone()).collect()
}

/// Parses an MP transcript (`start end Verb(Actor, Object)` per line).
#[pyfunction]
fn parse_mp_transcript(text: &str) -> PyResult<Vec<PyMotionPrimitive>> {
    ingest::parse_mp_transcript(text)
        .map(|v| v.into_iter().map(PyMotionPrimitive).collect())
        .map_err(value_err)
}

#[pyfunction]
fn merge_touch_grasp(mps: Vec<PyMotionPrimitive>) -> Vec<PyMotionPrimitive> {
    seqops::merge_touch_grasp(&unwrap_mps(&mps))
        .into_iter()
        .map(PyMotionPrimitive)
        .collect()
}

/// Detects inverse MPs in one sequence. With `task` and `gesture` set, the
/// matching canonical pattern is excluded.
#[pyfunction]
#[pyo3(signature = (mps, task=None, gesture=None, counting_mode="greedy", exclude_canonical=true))]
fn detect_inverse(
    mps: Vec<PyMotionPrimitive>,
    task: Option<&str>,
    gesture: Option<&str>,
    counting_mode: &str,
    exclude_canonical: bool,
) -> PyResult<Vec<PyInverseInstance>> {
    let opts = options(counting_mode, exclude_canonical)?;
    let table = builtin_canonical_table();
    let entry = match (task, gesture) {
        (Some(t), Some(g)) => {
            let t: Task = t.parse().map_err(value_err)?;
            let g: GestureId = g.parse().map_err(value_err)?;
            table.lookup(t, g).cloned()
        }
        _ => None,
    };
    Ok(inverse::detect_inverse(&unwrap_mps(&mps), entry.as_ref(), &opts)
        .into_iter()
        .map(PyInverseInstance)
        .collect())
}

/// Canonical MP labels for a task and gesture, or `None`.
#[pyfunction]
fn canonical_sequence(task: &str, gesture: &str) -> PyResult<Option<Vec<String>>> {
    let t: Task = task.parse().map_err(value_err)?;
    let g: GestureId = gesture.parse().map_err(value_err)?;
    Ok(builtin_canonical_table()
        .lookup(t, g)
        .map(|e| e.pattern.iter().map(|s| s.label()).collect()))
}

/// Returns `(rho, p_value)`.
#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::spearman(&x, &y).map(|r| (r.rho, r.p_value)).map_err(value_err)
}

/// Writes a seeded synthetic dataset to `path`; returns the trial count.
#[pyfunction]
#[pyo3(signature = (path, seed=7, trials_per_skill=4))]
fn synth_dataset(path: PathBuf, seed: u64, trials_per_skill: usize) -> PyResult<usize> {
    let spec = CorpusSpec {
        trials_per_skill,
        ..CorpusSpec::new(seed)
    };
    let corpus = synth::generate_corpus(&spec).map_err(value_err)?;
    synth::write_corpus(&path, &corpus).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(corpus.corpus.trials.len())
}

#[pyclass(name = "Dataset", frozen)]
pub struct PyDataset {
    corpus: Corpus,
    issues: Vec<(String, String)>,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (corpus, report) = ingest::scan_dataset(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let issues = report.issues.into_iter().map(|i| (i.trial_id, i.reason)).collect();
        Ok(PyDataset { corpus, issues })
    }

    fn __len__(&self) -> usize {
        self.corpus.trials.len()
    }

    fn trial_ids(&self) -> Vec<String> {
        self.corpus.trials.iter().map(|t| t.trial_id()).collect()
    }

    /// `(trial_id, reason)` for every trial skipped while loading.
    #[getter]
    fn issues(&self) -> Vec<(String, String)> {
        self.issues.clone()
    }

    /// Trial counts keyed by `"<task>/<skill>"`.
    fn summary(&self) -> std::collections::BTreeMap<String, usize> {
        let mut out = std::collections::BTreeMap::new();
        for t in &self.corpus.trials {
            *out.entry(format!("{}/{}", t.record.task.code(), t.record.skill.code()))
                .or_insert(0) += 1;
        }
        out
    }

    /// Trial-level detections over every merged transcript.
    #[pyo3(signature = (counting_mode="greedy", exclude_canonical=true))]
    fn detect(&self, counting_mode: &str, exclude_canonical: bool) -> PyResult<Vec<PyInverseInstance>> {
        let opts = options(counting_mode, exclude_canonical)?;
        let analysis = Analysis::run(&self.corpus, &builtin_canonical_table(), &opts);
        Ok(analysis.trial_instances.into_iter().map(PyInverseInstance).collect())
    }

    /// Spearman `(rho, p_value, n)` of a per-trial feature against the GRS
    /// total. `feature` is `"count"` or `"duration"`.
    #[pyo3(signature = (task, feature="count", counting_mode="greedy"))]
    fn grs_correlation(&self, task: &str, feature: &str, counting_mode: &str) -> PyResult<(f64, f64, usize)> {
        let task: Task = task.parse().map_err(value_err)?;
        let feature = match feature {
            "count" => Feature::Count,
            "duration" => Feature::DurationSeconds,
            other => return Err(value_err(format!("unknown feature `{other}`"))),
        };
        let opts = options(counting_mode, true)?;
        let analysis = Analysis::run(&self.corpus, &builtin_canonical_table(), &opts);
        let rows: Vec<_> = analysis.features.iter().filter(|f| f.record.task == task).collect();
        let x: Vec<f64> = rows.iter().map(|f| feature.value(f)).collect();
        let y: Vec<f64> = rows.iter().map(|f| GrsItem::Total.value(&f.record)).collect();
        let r = stats::spearman(&x, &y).map_err(value_err)?;
        Ok((r.rho, r.p_value, r.n))
    }
}

#[pymodule]
fn mpscope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMotionPrimitive>()?;
    m.add_class::<PyInverseInstance>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(parse_mp_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(merge_touch_grasp, m)?)?;
    m.add_function(wrap_pyfunction!(detect_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    Ok(())
}
