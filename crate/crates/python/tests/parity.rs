//! Bound functions against the native library on shared fixtures.

use dfrkit::features::FeatureSequence;
use dfrkit::{downsample_fast, pack, schedule, SchedulerParams, Scheme, TokenStream};
use dfrkit_py::dfrkit_py;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn fixtures() -> Vec<FeatureSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    (0..10)
        .map(|i| {
            let frames = 8 + 17 * i;
            let dim = 1 + i % 6;
            let data = (0..frames * dim)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            FeatureSequence::new(data, frames, dim, 80.0).unwrap()
        })
        .collect()
}

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "dfrkit").unwrap();
    dfrkit_py(&m).unwrap();
    m
}

fn array<'py>(py: Python<'py>, h: &FeatureSequence) -> Bound<'py, PyAny> {
    let bytes: Vec<u8> = h.as_slice().iter().flat_map(|x| x.to_ne_bytes()).collect();
    py.import("numpy")
        .unwrap()
        .call_method1("frombuffer", (PyBytes::new(py, &bytes), "float32"))
        .unwrap()
        .call_method1("reshape", (h.frames(), h.dim()))
        .unwrap()
}

#[test]
fn bound_outputs_match_native() {
    Python::attach(|py| {
        let m = module(py);
        for (i, h) in fixtures().iter().enumerate() {
            let arr = array(py, h);
            let native = schedule(h, &SchedulerParams::default()).unwrap();
            let (segments, score): (Vec<usize>, f64) = m
                .getattr("schedule")
                .unwrap()
                .call1((&arr,))
                .unwrap()
                .extract()
                .unwrap();
            assert_eq!(segments, native.scheme.segments(), "fixture {i}");
            assert_eq!(score.to_bits(), native.score.to_bits(), "fixture {i}");

            for mode in ["compact", "expanded"] {
                let kwargs = PyDict::new(py);
                kwargs.set_item("mode", mode).unwrap();
                let bound: Vec<Vec<f32>> = m
                    .getattr("downsample")
                    .unwrap()
                    .call((&arr, segments.clone()), Some(&kwargs))
                    .unwrap()
                    .call_method0("tolist")
                    .unwrap()
                    .extract()
                    .unwrap();
                let ours = downsample_fast(h, &native.scheme, mode.parse().unwrap()).unwrap();
                let flat: Vec<f32> = bound.concat();
                assert_eq!(flat.len(), ours.as_slice().len());
                for (a, b) in flat.iter().zip(ours.as_slice()) {
                    assert!(
                        (a - b).abs() <= 1e-6 * b.abs().max(1.0),
                        "fixture {i} {mode}"
                    );
                }
            }

            let codes: Vec<u64> = (0..segments.len() as u64)
                .map(|c| (c * 131) % 18225)
                .collect();
            let durations: Vec<u8> = segments.iter().map(|&s| s as u8).collect();
            let bound: Vec<u8> = m
                .getattr("pack")
                .unwrap()
                .call1((codes.clone(), durations, 18225u64))
                .unwrap()
                .extract()
                .unwrap();
            let ts = TokenStream::from_scheme(&codes, &native.scheme, 18225, 80.0).unwrap();
            assert_eq!(bound, pack(&ts), "fixture {i}");

            let back = m
                .getattr("unpack")
                .unwrap()
                .call1((PyBytes::new(py, &bound),))
                .unwrap();
            let frames: u64 = back.get_item("frames").unwrap().extract().unwrap();
            assert_eq!(frames as usize, h.frames());
        }
    });
}

#[test]
fn quantize_and_melt_match_native() {
    Python::attach(|py| {
        let m = module(py);
        let h = &fixtures()[5];
        let levels = vec![5u32; h.dim()];
        let bound: Vec<u64> = m
            .getattr("fsq_quantize_seq")
            .unwrap()
            .call1((array(py, h), levels.clone()))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(
            bound,
            dfrkit::FsqSpec::new(levels)
                .unwrap()
                .quantize_seq(h)
                .unwrap()
        );

        let draws: Vec<Option<Vec<f64>>> = m
            .getattr("melt_sample")
            .unwrap()
            .call1((100_000u64, 50usize, 7u64))
            .unwrap()
            .extract()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = dfrkit::MeltConfig::default();
        for d in draws {
            assert_eq!(d, dfrkit::melt_sample(100_000, &cfg, &mut rng));
        }
    });
}

#[test]
fn errors_become_python_exceptions() {
    Python::attach(|py| {
        let m = module(py);
        let h = &fixtures()[0];
        let err = m
            .getattr("schedule")
            .unwrap()
            .call1((array(py, h), 8.0, 2usize))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = m
            .getattr("unpack")
            .unwrap()
            .call1((PyBytes::new(py, b"nope"),))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let wrong = Scheme::ones(3, 4).unwrap().into_segments();
        let err = m
            .getattr("downsample")
            .unwrap()
            .call1((array(py, h), wrong))
            .unwrap_err();
        assert!(err.to_string().contains("frames"), "{err}");
    });
}
