//! Python bindings for the strumscribe transcription core.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use strumscribe::metrics::EvaluationReport;
use strumscribe::onsets::AudioBuffer;
use strumscribe::{
    bin_strums, BarlineTrack, DecoderConfig, MatchResult, OnsetConfig, PostprocConfig, RenderOptions,
    StrumSequence, SynthSpec,
};

fn to_py(e: strumscribe::Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(T::default()),
    }
}

fn bars(times: Vec<f64>) -> PyResult<BarlineTrack> {
    BarlineTrack::new(times).map_err(to_py)
}

#[pyclass(name = "Vocabulary", module = "strumscribe", frozen)]
struct PyVocabulary {
    inner: strumscribe::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = strumscribe::Vocabulary::from_json_str(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = strumscribe::Vocabulary::load(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    /// Pattern ids in decoding order, including the generated empty patterns.
    fn pattern_ids(&self) -> Vec<String> {
        self.inner.patterns().iter().map(|p| p.id().to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Vocabulary({} patterns)", self.inner.len())
    }
}

#[pyclass(name = "Transcription", module = "strumscribe", frozen)]
struct PyTranscription {
    inner: strumscribe::Transcription,
}

#[pymethods]
impl PyTranscription {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = strumscribe::Transcription::from_json_str(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        self.inner.total_cost
    }

    /// One pattern id per measure.
    #[getter]
    fn pattern_ids(&self) -> Vec<String> {
        self.inner.entries.iter().map(|e| e.pattern_id.clone()).collect()
    }

    #[getter]
    fn phases(&self) -> Vec<usize> {
        self.inner.entries.iter().map(|e| e.phase).collect()
    }

    #[getter]
    fn time_signatures(&self) -> Vec<String> {
        self.inner.entries.iter().map(|e| e.time_signature.to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Transcription({} measures, cost={})", self.inner.len(), self.inner.total_cost)
    }
}

/// Bins `strums` on the bar-line grid and decodes them. Returns the
/// transcription and the number of strums outside the grid.
#[pyfunction]
#[pyo3(signature = (strums, barlines, vocab, sigma=None, c1=None, c2=None))]
fn decode(
    strums: Vec<f64>,
    barlines: Vec<f64>,
    vocab: &PyVocabulary,
    sigma: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
) -> PyResult<(PyTranscription, usize)> {
    let mut cfg = DecoderConfig::default();
    cfg.sigma = sigma.unwrap_or(cfg.sigma);
    cfg.c1 = c1.unwrap_or(cfg.c1);
    cfg.c2 = c2.unwrap_or(cfg.c2);
    let strums = StrumSequence::new(strums).map_err(to_py)?;
    let (measures, discarded) = bin_strums(&strums, &bars(barlines)?);
    let inner = strumscribe::decode(&measures, &vocab.inner, &cfg).map_err(to_py)?;
    Ok((PyTranscription { inner }, discarded))
}

/// Cleans a raw bar-line track. `config` is a JSON object of post-processing
/// options; omitted keys keep their defaults.
#[pyfunction]
#[pyo3(signature = (raw, config=None))]
fn postprocess_barlines(raw: Vec<f64>, config: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg: PostprocConfig = parse_config(config)?;
    let out = strumscribe::postprocess_barlines(&bars(raw)?, &cfg).map_err(to_py)?;
    Ok(out.into_times())
}

#[pyfunction]
fn discontinuity_rate(barlines: Vec<f64>) -> PyResult<f64> {
    Ok(strumscribe::discontinuity_rate(&bars(barlines)?))
}

fn match_dict<'py>(py: Python<'py>, m: &MatchResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("true_positives", m.true_positives)?;
    d.set_item("false_positives", m.false_positives)?;
    d.set_item("false_negatives", m.false_negatives)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (reference, estimate, tolerance_sec=0.05))]
fn match_events<'py>(
    py: Python<'py>,
    reference: Vec<f64>,
    estimate: Vec<f64>,
    tolerance_sec: f64,
) -> PyResult<Bound<'py, PyDict>> {
    match_dict(py, &strumscribe::match_events(&reference, &estimate, tolerance_sec))
}

fn report_dict<'py>(py: Python<'py>, r: &EvaluationReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("f1", r.f1)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("pattern_disc", r.pattern_disc)?;
    d.set_item("timesig_disc", r.timesig_disc)?;
    d.set_item("measure_disc", r.measure_disc)?;
    d.set_item("true_positives", r.true_positives)?;
    d.set_item("false_positives", r.false_positives)?;
    d.set_item("false_negatives", r.false_negatives)?;
    Ok(d)
}

/// Scores a transcription against ground-truth strum times.
#[pyfunction]
#[pyo3(signature = (transcription, barlines, vocab, ground_truth, tolerance_sec=0.05))]
fn evaluate<'py>(
    py: Python<'py>,
    transcription: &PyTranscription,
    barlines: Vec<f64>,
    vocab: &PyVocabulary,
    ground_truth: Vec<f64>,
    tolerance_sec: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let truth = StrumSequence::new(ground_truth).map_err(to_py)?;
    let report = strumscribe::evaluate_transcription(
        &transcription.inner,
        &bars(barlines)?,
        &vocab.inner,
        &truth,
        tolerance_sec,
    )
    .map_err(to_py)?;
    report_dict(py, &report)
}

/// Nominal strum times implied by a transcription on a bar-line grid.
#[pyfunction]
fn reconstruct_strums(transcription: &PyTranscription, barlines: Vec<f64>, vocab: &PyVocabulary) -> PyResult<Vec<f64>> {
    let s = strumscribe::reconstruct_strums(&transcription.inner, &bars(barlines)?, &vocab.inner).map_err(to_py)?;
    Ok(s.into_times())
}

#[pyfunction]
#[pyo3(signature = (transcription, vocab, grid_resolution=16, use_repeat_symbol=true, show_pattern_ids=false))]
fn render(
    transcription: &PyTranscription,
    vocab: &PyVocabulary,
    grid_resolution: usize,
    use_repeat_symbol: bool,
    show_pattern_ids: bool,
) -> PyResult<String> {
    let opts = RenderOptions { use_repeat_symbol, grid_resolution, show_pattern_ids };
    Ok(strumscribe::render_text(&transcription.inner, &vocab.inner, &opts).map_err(to_py)?.text)
}

/// Onset times in seconds for mono samples in [-1, 1].
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, config=None))]
fn detect_onsets(py: Python<'_>, samples: Vec<f32>, sample_rate: u32, config: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg: OnsetConfig = parse_config(config)?;
    let audio = AudioBuffer::new(samples, sample_rate).map_err(to_py)?;
    let onsets = py.detach(|| strumscribe::detect_onsets(&audio, &cfg)).map_err(to_py)?;
    Ok(onsets.into_times())
}

/// Generates a synthetic song. `spec` is a JSON object of generator options.
#[pyfunction]
#[pyo3(signature = (vocab, spec=None))]
fn synth<'py>(py: Python<'py>, vocab: &PyVocabulary, spec: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let spec: SynthSpec = parse_config(spec)?;
    let song = strumscribe::generate_song(&spec, &vocab.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("barlines", song.bars.times().to_vec())?;
    d.set_item("nominal", song.nominal.times().to_vec())?;
    d.set_item("observed", song.observed.times().to_vec())?;
    d.set_item("ground_truth", PyTranscription { inner: song.ground_truth })?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "strumscribe")]
fn strumscribe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyTranscription>()?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess_barlines, m)?)?;
    m.add_function(wrap_pyfunction!(discontinuity_rate, m)?)?;
    m.add_function(wrap_pyfunction!(match_events, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_strums, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(detect_onsets, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
