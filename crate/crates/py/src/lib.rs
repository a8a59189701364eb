//! Python bindings. Arrays cross the boundary as lists and files by path;
//! errors surface as `ValueError` with the core message.

use beautykit::bench::{self, BenchManifest, ManifestStats};
use beautykit::geom::{canonical_topology, LandmarkSet};
use beautykit::imgcore::{encode_png, load_png, BitDepth};
use beautykit::layers::{self, MakeupLayer};
use beautykit::rewards;
use beautykit::verifier::OpacityParams;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Product of image similarity and face similarity.
#[pyfunction]
fn cxf(clip_i: f64, face_sim: f64) -> f64 {
    bench::cxf(clip_i, face_sim)
}

/// Group-relative advantages: rewards standardized within the group.
#[pyfunction]
fn grpo_advantages(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    rewards::grpo_advantages(&rewards).map_err(err)
}

/// Shannon entropy in bits of a histogram.
#[pyfunction]
fn entropy_bits(counts: Vec<f64>) -> PyResult<f64> {
    bench::entropy_bits(&counts).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (dh, dc, dl, weights=None))]
fn opacity(dh: f64, dc: f64, dl: f64, weights: Option<(f64, f64, f64)>) -> PyResult<f64> {
    let mut p = OpacityParams::default();
    if let Some((h, c, l)) = weights {
        (p.lambda_h, p.lambda_c, p.lambda_l) = (h, c, l);
    }
    p.validate().map_err(err)?;
    Ok(p.opacity(dh, dc, dl))
}

/// Composition statistics of a benchmark manifest, as a JSON string.
#[pyfunction]
fn manifest_stats(path: &str) -> PyResult<String> {
    let m = BenchManifest::load(path).map_err(err)?;
    let s = ManifestStats::of(&m).map_err(err)?;
    Ok(serde_json::to_string(&s).map_err(err)?)
}

/// Warps a layer file onto a face and writes the result as a 16-bit PNG.
#[pyfunction]
fn apply_layer(layer: &str, image: &str, landmarks: &str, out: &str) -> PyResult<()> {
    let layer = MakeupLayer::load(layer).map_err(err)?;
    let img = load_png(image).map_err(err)?;
    let lms = LandmarkSet::load(landmarks).map_err(err)?;
    let result = layers::apply_layer(&layer, &img, &lms, canonical_topology()).map_err(err)?;
    std::fs::write(out, encode_png(&result, BitDepth::Sixteen).map_err(err)?).map_err(err)
}

#[pymodule]
fn beautykit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(cxf, m)?)?;
    m.add_function(wrap_pyfunction!(grpo_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_bits, m)?)?;
    m.add_function(wrap_pyfunction!(opacity, m)?)?;
    m.add_function(wrap_pyfunction!(manifest_stats, m)?)?;
    m.add_function(wrap_pyfunction!(apply_layer, m)?)?;
    Ok(())
}
