//! Python bindings: signal processing, WFDB reading, segment caches,
//! fold planning, metrics and the four classifier architectures.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cfan_core::dataset::{self, SegmentSet, Task};
use cfan_core::models::{build_model, train, ArchOptions, Architecture, Model, ModelSpec, Samples, TrainConfig};
use cfan_core::{dsp, eval, fanlayers, wfdb};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_task(name: &str) -> PyResult<Task> {
    name.parse().map_err(value_err)
}

/// Real and imaginary parts of the one-sided spectrum.
#[pyfunction]
fn fft_real_imag(x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let s = dsp::fft_real_imag(&x);
    (s.real, s.imag)
}

#[pyfunction]
#[pyo3(signature = (x, window = 5, order = 3))]
fn savitzky_golay(x: Vec<f64>, window: usize, order: usize) -> PyResult<Vec<f64>> {
    dsp::savitzky_golay(&x, window, order).map_err(value_err)
}

#[pyfunction]
fn zscore(x: Vec<f64>) -> PyResult<Vec<f64>> {
    dsp::zscore(&x).map_err(value_err)
}

/// R-peak sample indices.
#[pyfunction]
fn pan_tompkins_rpeaks(x: Vec<f64>, fs: f64) -> Vec<usize> {
    dsp::pan_tompkins_rpeaks(&x, fs)
}

/// STFT magnitude image as `(rows, cols, row-major data)`.
#[pyfunction]
fn stft_spectrogram(x: Vec<f64>) -> PyResult<(usize, usize, Vec<f64>)> {
    let s = dsp::stft_spectrogram(&x).map_err(value_err)?;
    Ok((s.rows, s.cols, s.data))
}

#[pyfunction]
fn roc_auc_binary(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::roc_auc_binary(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn roc_curve(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Vec<(f64, f64)>> {
    eval::roc_curve(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn macro_ovr_auc(probabilities: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    eval::macro_ovr_auc(&probabilities, &labels).map_err(value_err)
}

#[pyfunction]
fn eer_accuracy(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::eer_accuracy(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn accuracy_argmax(probabilities: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    eval::accuracy_argmax(&probabilities, &labels).map_err(value_err)
}

/// `(t, df, p)` for the alternative `mean(a) > mean(b)`.
#[pyfunction]
fn t_test_one_tailed(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let t = eval::t_test_one_tailed(&a, &b).map_err(value_err)?;
    Ok((t.t, t.df, t.p))
}

/// Fold id per segment.
#[pyfunction]
#[pyo3(signature = (labels, k, seed = 0))]
fn stratified_kfold(labels: Vec<usize>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(dataset::stratified_kfold(&labels, k, seed).map_err(value_err)?.assignments)
}

/// Train, validation and test indices when `held_out` is the test fold.
#[pyfunction]
#[pyo3(signature = (labels, k, held_out, seed = 0))]
fn fold_split(labels: Vec<usize>, k: usize, held_out: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let plan = dataset::stratified_kfold(&labels, k, seed).map_err(value_err)?;
    let s = dataset::make_split(&plan, held_out).map_err(value_err)?;
    Ok((s.train, s.validation, s.test))
}

/// Fits the sine-extrapolation comparison and returns its metrics.
#[pyfunction]
#[pyo3(signature = (fan_width = 8, steps = 2000, learning_rate = 0.01, seed = 0))]
fn sine_extrapolation(fan_width: usize, steps: usize, learning_rate: f64, seed: u64) -> PyResult<Vec<(String, f64)>> {
    let r = fanlayers::sine_extrapolation(fan_width, steps, learning_rate, seed).map_err(value_err)?;
    Ok(vec![
        ("fan_params".into(), r.fan_params as f64),
        ("mlp_params".into(), r.mlp_params as f64),
        ("fan_train_mse".into(), r.fan_train_mse),
        ("mlp_train_mse".into(), r.mlp_train_mse),
        ("fan_test_mse".into(), r.fan_test_mse),
        ("mlp_test_mse".into(), r.mlp_test_mse),
    ])
}

/// A WFDB record with physical signals and annotations.
#[pyclass(name = "Record", module = "cfan", frozen)]
struct PyRecord {
    inner: wfdb::Record,
}

#[pymethods]
impl PyRecord {
    #[staticmethod]
    #[pyo3(signature = (directory, name, annotator = None))]
    fn load(directory: PathBuf, name: &str, annotator: Option<&str>) -> PyResult<Self> {
        let inner = wfdb::Record::load(&directory, name, annotator).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.header.record_name.clone()
    }

    #[getter]
    fn fs(&self) -> f64 {
        self.inner.header.sampling_frequency
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.header.n_samples
    }

    /// Physical values in mV, one list per channel.
    #[getter]
    fn signals(&self) -> Vec<Vec<f64>> {
        self.inner.signals.clone()
    }

    #[getter]
    fn adc(&self) -> Vec<Vec<i32>> {
        self.inner.adc.clone()
    }

    /// `(sample, symbol, aux)` per annotation.
    #[getter]
    fn annotations(&self) -> Vec<(u64, String, Option<String>)> {
        self.inner
            .annotations
            .iter()
            .map(|a| (a.sample_index, a.symbol_char().to_string(), a.aux_text.clone()))
            .collect()
    }
}

/// Labelled segments of one task, as stored by `cfan prepare`.
#[pyclass(name = "SegmentSet", module = "cfan", frozen)]
struct PySegmentSet {
    inner: SegmentSet,
}

#[pymethods]
impl PySegmentSet {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: SegmentSet::load(&path).map_err(value_err)?,
        })
    }

    /// Reads the raw corpus of `task` from `directory`.
    #[staticmethod]
    fn prepare(task: &str, directory: PathBuf) -> PyResult<Self> {
        let p = dataset::prepare(parse_task(task)?, &directory).map_err(value_err)?;
        Ok(Self { inner: p.set })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.segments.len()
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.task.name().to_string()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.inner.class_names.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.inner.class_counts()
    }

    fn samples(&self, index: usize) -> PyResult<Vec<f64>> {
        self.inner
            .segments
            .get(index)
            .map(|s| s.samples.clone())
            .ok_or_else(|| value_err(format!("segment {index} out of range")))
    }
}

/// One classifier: `cnn1d`, `fft1d`, `fan` or `cfan` for a task.
#[pyclass(name = "Model", module = "cfan")]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (arch, task, seed = 0, version = None, filters = None, kernel = None, fc_units = None))]
    fn new(
        arch: &str,
        task: &str,
        seed: u64,
        version: Option<u8>,
        filters: Option<usize>,
        kernel: Option<usize>,
        fc_units: Option<[usize; 2]>,
    ) -> PyResult<Self> {
        let arch: Architecture = arch.parse().map_err(value_err)?;
        let task = parse_task(task)?;
        let mut opts = match version {
            Some(v) => ArchOptions::version(v).map_err(value_err)?,
            None => ArchOptions::for_task(task),
        };
        if filters.is_some() || kernel.is_some() || fc_units.is_some() {
            opts = opts.clone().scaled(
                filters.unwrap_or(opts.filters),
                kernel.unwrap_or(opts.kernel),
                fc_units.unwrap_or(opts.fc_units),
            );
        }
        let spec = ModelSpec::with_options(arch, task, &opts).map_err(value_err)?;
        Ok(Self {
            inner: build_model(&spec, seed).map_err(value_err)?,
        })
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.spec.architecture.name().to_string()
    }

    #[getter]
    fn segment_len(&self) -> usize {
        self.inner.spec.segment_len
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.spec.n_classes
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.params.scalar_count()
    }

    /// Class probabilities, one row per segment.
    fn predict(&self, segments: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let refs: Vec<&[f64]> = segments.iter().map(Vec::as_slice).collect();
        self.inner.predict_raw(&refs, 64).map_err(value_err)
    }

    /// Trains with early stopping and returns
    /// `(epoch, train_loss, val_loss, val_accuracy)` per epoch.
    #[pyo3(signature = (
        inputs, labels, val_inputs, val_labels,
        epochs = 300, patience = 30, batch_size = 32, micro_batch = 64, learning_rate = 0.001, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        py: Python<'_>,
        inputs: Vec<Vec<f64>>,
        labels: Vec<usize>,
        val_inputs: Vec<Vec<f64>>,
        val_labels: Vec<usize>,
        epochs: usize,
        patience: usize,
        batch_size: usize,
        micro_batch: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, f64, f64)>> {
        let cfg = TrainConfig {
            batch_size,
            micro_batch,
            learning_rate,
            max_epochs: epochs,
            patience: patience.min(epochs),
            seed,
        };
        let model = &mut self.inner;
        let history = py
            .detach(|| {
                let tr = Samples::new(inputs.iter().map(Vec::as_slice).collect(), labels)?;
                let va = Samples::new(val_inputs.iter().map(Vec::as_slice).collect(), val_labels)?;
                train(model, &tr, &va, &cfg, |_| {})
            })
            .map_err(value_err)?;
        Ok(history
            .epochs
            .iter()
            .map(|e| (e.epoch, e.train_loss, e.val_loss, e.val_accuracy))
            .collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = File::create(&path).map_err(value_err)?;
        self.inner.save_checkpoint(&mut BufWriter::new(f)).map_err(value_err)
    }

    /// Loads weights from a checkpoint of the same architecture.
    fn load(&mut self, path: PathBuf) -> PyResult<()> {
        let f = File::open(&path).map_err(value_err)?;
        self.inner.load_checkpoint(&mut BufReader::new(f)).map_err(value_err)
    }
}

#[pymodule]
fn cfan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fft_real_imag, m)?)?;
    m.add_function(wrap_pyfunction!(savitzky_golay, m)?)?;
    m.add_function(wrap_pyfunction!(zscore, m)?)?;
    m.add_function(wrap_pyfunction!(pan_tompkins_rpeaks, m)?)?;
    m.add_function(wrap_pyfunction!(stft_spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc_binary, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(macro_ovr_auc, m)?)?;
    m.add_function(wrap_pyfunction!(eer_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_argmax, m)?)?;
    m.add_function(wrap_pyfunction!(t_test_one_tailed, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(fold_split, m)?)?;
    m.add_function(wrap_pyfunction!(sine_extrapolation, m)?)?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PySegmentSet>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
