//! Python bindings. Feature matrices cross the boundary as C-contiguous
//! float32 buffers (numpy arrays or anything else exposing the buffer
//! protocol); returned matrices are numpy arrays.

use dfrkit::features::FeatureSequence;
use dfrkit::meltman::MeltConfig;
use dfrkit::scheduler::{schedule_with_vanilla, SchedulerParams};
use dfrkit::{DownsampleMode, Error, FsqSpec, Objective, Scheme, Token, TokenStream};
use pyo3::buffer::PyBuffer;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyByteArray, PyBytes, PyDict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn features(
    py: Python<'_>,
    obj: &Bound<'_, PyAny>,
    base_rate_hz: f64,
) -> PyResult<FeatureSequence> {
    let buf = PyBuffer::<f32>::get(obj)?;
    let (frames, dim) = match buf.shape() {
        [t, d] => (*t, *d),
        [t] => (*t, 1),
        s => {
            return Err(PyValueError::new_err(format!(
                "expected a 1-D or 2-D float32 array, got {} dimensions",
                s.len()
            )))
        }
    };
    if !buf.is_c_contiguous() {
        return Err(PyValueError::new_err("feature array must be C-contiguous"));
    }
    FeatureSequence::new(buf.to_vec(py)?, frames, dim, base_rate_hz).map_err(to_py)
}

fn to_numpy<'py>(py: Python<'py>, seq: &FeatureSequence) -> PyResult<Bound<'py, PyAny>> {
    let bytes: Vec<u8> = seq
        .as_slice()
        .iter()
        .flat_map(|x| x.to_ne_bytes())
        .collect();
    let np = py.import("numpy")?;
    np.call_method1("frombuffer", (PyByteArray::new(py, &bytes), "float32"))?
        .call_method1("reshape", (seq.frames(), seq.dim()))
}

fn scheme(segments: Vec<usize>, max_seg: usize) -> PyResult<Scheme> {
    Scheme::new(segments, max_seg).map_err(to_py)
}

/// Optimal segment lengths and their objective value.
#[pyfunction]
#[pyo3(signature = (features, rate = 2.0, max_seg = 4, objective = "jh", vanilla = false))]
fn schedule(
    py: Python<'_>,
    features: &Bound<'_, PyAny>,
    rate: f64,
    max_seg: usize,
    objective: &str,
    vanilla: bool,
) -> PyResult<(Vec<usize>, f64)> {
    let h = self::features(py, features, 80.0)?;
    let objective: Objective = objective.parse().map_err(to_py)?;
    let params = SchedulerParams::new(rate, max_seg, objective).map_err(to_py)?;
    let s = py
        .detach(|| {
            if vanilla {
                schedule_with_vanilla(&h, &params)
            } else {
                dfrkit::schedule(&h, &params)
            }
        })
        .map_err(to_py)?;
    Ok((s.scheme.into_segments(), s.score))
}

/// Segment means, one row per segment (`compact`) or per frame (`expanded`).
#[pyfunction]
#[pyo3(signature = (features, segments, max_seg = 4, mode = "compact"))]
fn downsample<'py>(
    py: Python<'py>,
    features: &Bound<'py, PyAny>,
    segments: Vec<usize>,
    max_seg: usize,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let h = self::features(py, features, 80.0)?;
    let mode: DownsampleMode = mode.parse().map_err(to_py)?;
    let s = scheme(segments, max_seg)?;
    let out = dfrkit::downsample_fast(&h, &s, mode).map_err(to_py)?;
    to_numpy(py, &out)
}

#[pyfunction]
fn fsq_quantize_seq(
    py: Python<'_>,
    rows: &Bound<'_, PyAny>,
    levels: Vec<u32>,
) -> PyResult<Vec<u64>> {
    let spec = FsqSpec::new(levels).map_err(to_py)?;
    let rows = features(py, rows, 80.0)?;
    spec.quantize_seq(&rows).map_err(to_py)
}

/// Packs codes and durations into the binary token format.
#[pyfunction]
#[pyo3(signature = (codes, durations, codebook_size, max_duration = 4, base_rate_hz = 80.0))]
fn pack<'py>(
    py: Python<'py>,
    codes: Vec<u64>,
    durations: Vec<u8>,
    codebook_size: u64,
    max_duration: u8,
    base_rate_hz: f64,
) -> PyResult<Bound<'py, PyBytes>> {
    if codes.len() != durations.len() {
        return Err(PyValueError::new_err(format!(
            "{} codes but {} durations",
            codes.len(),
            durations.len()
        )));
    }
    let tokens = codes
        .into_iter()
        .zip(durations)
        .map(|(code, duration)| Token { code, duration })
        .collect();
    let ts = TokenStream::new(tokens, codebook_size, max_duration, base_rate_hz).map_err(to_py)?;
    Ok(PyBytes::new(py, &dfrkit::pack(&ts)))
}

#[pyfunction]
fn unpack<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    let ts = dfrkit::unpack(data).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("codes", ts.codes())?;
    let durations: Vec<usize> = ts.durations().into_iter().map(usize::from).collect();
    out.set_item("durations", durations)?;
    out.set_item("codebook_size", ts.codebook_size())?;
    out.set_item("max_duration", ts.max_duration())?;
    out.set_item("base_rate_hz", ts.base_rate_hz())?;
    out.set_item("frames", ts.frames())?;
    Ok(out)
}

/// `n` proportion draws for training step `step`; `None` marks a skip.
#[pyfunction]
#[pyo3(signature = (step, n = 1, seed = 0, config = None))]
fn melt_sample(
    step: u64,
    n: usize,
    seed: u64,
    config: Option<&str>,
) -> PyResult<Vec<Option<Vec<f64>>>> {
    let cfg = match config {
        Some(text) => MeltConfig::from_json(text).map_err(to_py)?,
        None => MeltConfig::default(),
    };
    cfg.validate().map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| dfrkit::melt_sample(step, &cfg, &mut rng))
        .collect())
}

#[pymodule]
#[pyo3(name = "dfrkit")]
pub fn dfrkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(downsample, m)?)?;
    m.add_function(wrap_pyfunction!(fsq_quantize_seq, m)?)?;
    m.add_function(wrap_pyfunction!(pack, m)?)?;
    m.add_function(wrap_pyfunction!(unpack, m)?)?;
    m.add_function(wrap_pyfunction!(melt_sample, m)?)?;
    Ok(())
}
