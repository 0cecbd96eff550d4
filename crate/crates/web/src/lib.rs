//! Browser bindings: correlation curves, single-qubit block phases and a
//! template summary. Each export returns a JSON string.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use pce_core::cartan::{optimize, CartanConfig};
use pce_core::circuit::{build_hadamard_test, build_time_evolution, Basis, Time};
use pce_core::exec::EdOracle;
use pce_core::experiment::{compile_pce, first_site_x, load, measure, time_grid};
use pce_core::linalg::{phase_distance2, Mat2};
use pce_core::model::{build_model, ModelSpec};
use pce_core::rip::peel_symbolic;
use pce_core::transpile::{to_native, zxzxz, zxzxz_matrix, NativeOp};
use pce_core::{PceError, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest chain the page will simulate.
pub const MAX_SITES: usize = 6;
pub const MAX_TIME_POINTS: usize = 400;

#[derive(Serialize)]
struct Curves {
    times: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    oracle_re: Vec<f64>,
    oracle_im: Vec<f64>,
    max_error: f64,
    shots: Option<u64>,
    circuits: usize,
    payload_bytes: usize,
}

fn spec(model: &str, sites: usize) -> Result<ModelSpec> {
    if !(2..=MAX_SITES).contains(&sites) {
        return Err(PceError::Config(format!("sites must be in 2..={MAX_SITES}")));
    }
    Ok(ModelSpec::new(model.parse()?, sites))
}

/// Pipeline and exact correlation of X on the first site. `shots == 0`
/// gives noiseless expectation values.
pub fn correlation_json(model: &str, sites: usize, time_points: usize, t_max: f64, shots: u64, seed: u64) -> Result<String> {
    if time_points == 0 || time_points > MAX_TIME_POINTS {
        return Err(PceError::Config(format!("time points must be in 1..={MAX_TIME_POINTS}")));
    }
    let spec = spec(model, sites)?;
    let h = build_model(&spec)?;
    let d = optimize(&h, &CartanConfig { seed, ..CartanConfig::default() })?;
    let op = first_site_x(sites)?;
    let times = time_grid(time_points, t_max);
    let payloads = compile_pce(&d, &op, &times)?;
    let shots = (shots > 0).then_some(shots);
    let z = measure(&load(&payloads)?, shots, seed)?;
    let oracle = EdOracle::new(&h, &op, &op)?;
    let exact: Vec<Complex64> = times.iter().map(|&t| oracle.correlation(t)).collect();
    let n = times.len();
    let max_error = (0..n)
        .map(|i| (z[i] - exact[i].re).abs().max((z[n + i] - exact[i].im).abs()))
        .fold(0.0, f64::max);
    let curves = Curves {
        re: z[..n].to_vec(),
        im: z[n..].to_vec(),
        oracle_re: exact.iter().map(|c| c.re).collect(),
        oracle_im: exact.iter().map(|c| c.im).collect(),
        times,
        max_error,
        shots,
        circuits: 2 * n,
        payload_bytes: payloads.iter().map(|p| p.bytes.len()).sum(),
    };
    Ok(serde_json::to_string(&curves)?)
}

#[derive(Serialize)]
struct Block {
    /// VZ phases in time order around the two X90 pulses.
    phases: [f64; 3],
    phi: f64,
    theta: f64,
    lambda: f64,
    error: f64,
}

fn u3(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = |a: f64| Complex64::from_polar(1.0, a);
    [
        [Complex64::new(c, 0.0), -e(lambda) * s],
        [e(phi) * s, e(phi + lambda) * c],
    ]
}

/// VZ phases of the five-op block reproducing `U3(θ, φ, λ)`.
pub fn zxzxz_json(theta: f64, phi: f64, lambda: f64) -> Result<String> {
    let u = u3(theta, phi, lambda);
    let (p, t, l) = zxzxz(&u)?;
    let block = Block {
        phases: [l - FRAC_PI_2, std::f64::consts::PI - t, p - FRAC_PI_2],
        phi: p,
        theta: t,
        lambda: l,
        error: phase_distance2(&zxzxz_matrix(p, t, l), &u),
    };
    Ok(serde_json::to_string(&block)?)
}

#[derive(Serialize)]
struct TemplateSummary {
    key: String,
    n_qubits: usize,
    ops: usize,
    vz: usize,
    x90: usize,
    cz: usize,
    slots: usize,
    varying: usize,
    rows: Vec<Vec<f64>>,
    varying_columns: Vec<usize>,
}

/// Template of the real-basis sweep and the time-dependent columns of the
/// first few parameter rows.
pub fn template_json(model: &str, sites: usize, time_points: usize, t_max: f64) -> Result<String> {
    let spec = spec(model, sites)?;
    let d = optimize(&build_model(&spec)?, &CartanConfig::default())?;
    let op = first_site_x(sites)?;
    let evolution = build_time_evolution(&d, Time::Symbolic)?;
    let symbolic = peel_symbolic(&to_native(&build_hadamard_test(&op, &op, &evolution, Basis::Real)?)?);
    let template = &symbolic.template;
    let count = |f: fn(&NativeOp<u32>) -> bool| template.ops.iter().filter(|o| f(o)).count();
    let times = time_grid(time_points.clamp(1, 8), t_max);
    let rows: Vec<Vec<f64>> = times.iter().map(|&t| symbolic.row_at(t)).collect::<Result<_>>()?;
    let varying_columns: Vec<usize> = (0..template.n_slots)
        .filter(|&j| rows.iter().any(|r| r[j].to_bits() != rows[0][j].to_bits()))
        .collect();
    let summary = TemplateSummary {
        key: template.key().to_string(),
        n_qubits: template.n_qubits,
        ops: template.ops.len(),
        vz: count(|o| matches!(o, NativeOp::Vz { .. })),
        x90: count(|o| matches!(o, NativeOp::X90 { .. })),
        cz: count(|o| matches!(o, NativeOp::Cz { .. })),
        slots: template.n_slots,
        varying: symbolic.varying_len(),
        rows: rows.iter().map(|r| varying_columns.iter().map(|&j| r[j]).collect()).collect(),
        varying_columns,
    };
    Ok(serde_json::to_string(&summary)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn correlation(model: &str, sites: usize, time_points: usize, t_max: f64, shots: u32, seed: u32) -> std::result::Result<String, JsError> {
    js(correlation_json(model, sites, time_points, t_max, shots as u64, seed as u64))
}

#[wasm_bindgen]
pub fn block_phases(theta: f64, phi: f64, lambda: f64) -> std::result::Result<String, JsError> {
    js(zxzxz_json(theta, phi, lambda))
}

#[wasm_bindgen]
pub fn template_summary(model: &str, sites: usize, time_points: usize, t_max: f64) -> std::result::Result<String, JsError> {
    js(template_json(model, sites, time_points, t_max))
}
