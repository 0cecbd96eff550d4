//! End-to-end correlation experiment, with and without parameterized
//! circuit execution (PCE), plus the timing harness.
//!
//! Circuits are numbered basis-major: the real-part circuits for every time
//! point come first, then the imaginary-part ones.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::{optimize, CartanConfig, CartanDecomposition};
use crate::circuit::{build_hadamard_test, build_time_evolution, Basis, Circuit, Time};
use crate::error::{PceError, Result};
use crate::exec::{circuit_rng, sample, simulate, stitch_row, z_estimate, CorrelationSeries, Executable};
use crate::model::{build_model, ModelSpec};
use crate::pauli::{Pauli, PauliString};
use crate::report::{PathTimes, ProfileReport};
use crate::rip::{self, ParameterTable};
use crate::transpile::to_native;

pub const BASES: [Basis; 2] = [Basis::Real, Basis::Imag];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pce,
    NoPce,
    Both,
    /// Noiseless expectation values through the PCE path.
    Exact,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pce => "pce",
            Mode::NoPce => "no-pce",
            Mode::Both => "both",
            Mode::Exact => "exact",
        })
    }
}

impl FromStr for Mode {
    type Err = PceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pce" => Ok(Mode::Pce),
            "no-pce" | "nopce" => Ok(Mode::NoPce),
            "both" => Ok(Mode::Both),
            "exact" => Ok(Mode::Exact),
            other => Err(PceError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// The two ways of getting from a decomposition to executables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Path {
    NoPce,
    Pce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub time_points: usize,
    pub t_max: f64,
    pub shots: u64,
    pub mode: Mode,
    pub seed: u64,
    /// Timings are the median over this many runs.
    pub repetitions: usize,
    pub cartan: CartanConfig,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            model,
            time_points: 50,
            t_max: 5.0,
            shots: 1000,
            mode: Mode::Both,
            seed: 0,
            repetitions: 3,
            cartan: CartanConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.sites < 2 {
            return Err(PceError::Config(format!("sites must be at least 2, got {}", self.model.sites)));
        }
        if self.time_points == 0 {
            return Err(PceError::Config("at least one time point is required".into()));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(PceError::Config(format!("t_max must be finite and non-negative, got {}", self.t_max)));
        }
        if self.mode != Mode::Exact && self.shots == 0 {
            return Err(PceError::Config("shots must be at least 1 outside exact mode".into()));
        }
        if self.repetitions == 0 {
            return Err(PceError::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn shots(&self) -> Option<u64> {
        (self.mode != Mode::Exact).then_some(self.shots)
    }

    pub fn paths(&self) -> Vec<Path> {
        match self.mode {
            Mode::Pce | Mode::Exact => vec![Path::Pce],
            Mode::NoPce => vec![Path::NoPce],
            Mode::Both => vec![Path::NoPce, Path::Pce],
        }
    }
}

/// `n` evenly spaced times in `[0, t_max]`, both ends included.
pub fn time_grid(n: usize, t_max: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `X` on the first site of an `n`-site chain.
pub fn first_site_x(n: usize) -> Result<PauliString> {
    PauliString::from_sites(n, &[(0, Pauli::X)])
}

/// Binary payload covering the listed circuits, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub bytes: Vec<u8>,
    pub circuit_ids: Vec<usize>,
}

fn hadamard_circuit(d: &CartanDecomposition, op: &PauliString, t: Time, basis: Basis) -> Result<Circuit> {
    let evolution = build_time_evolution(d, t)?;
    build_hadamard_test(op, op, &evolution, basis)
}

/// Compiles every circuit on its own: build, lower to native form, peel and
/// binarize, once per (basis, time).
pub fn compile_no_pce(d: &CartanDecomposition, op: &PauliString, times: &[f64]) -> Result<Vec<Payload>> {
    compile_no_pce_with(d, op, times, &mut Vec::new())
}

/// [`compile_no_pce`] writing into buffers taken from `pool`.
pub fn compile_no_pce_with(
    d: &CartanDecomposition,
    op: &PauliString,
    times: &[f64],
    pool: &mut Vec<Vec<u8>>,
) -> Result<Vec<Payload>> {
    let mut out = Vec::with_capacity(2 * times.len());
    for basis in BASES {
        for &t in times {
            let native = to_native(&hadamard_circuit(d, op, Time::At(t), basis)?)?;
            let (template, row) = rip::peel(&native)?;
            let mut table = ParameterTable::new(template.n_slots);
            table.push(0, &row)?;
            let bytes = rip::serialize_into(&template, &table, pool.pop().unwrap_or_default())?;
            out.push(Payload { bytes, circuit_ids: vec![out.len()] });
        }
    }
    Ok(out)
}

/// Compiles one symbolic circuit per basis into a template, then peels the
/// phase row of every time point from it. Each basis yields one payload.
pub fn compile_pce(d: &CartanDecomposition, op: &PauliString, times: &[f64]) -> Result<Vec<Payload>> {
    compile_pce_with(d, op, times, &mut Vec::new())
}

/// [`compile_pce`] writing into buffers taken from `pool`.
pub fn compile_pce_with(
    d: &CartanDecomposition,
    op: &PauliString,
    times: &[f64],
    pool: &mut Vec<Vec<u8>>,
) -> Result<Vec<Payload>> {
    let mut out = Vec::with_capacity(BASES.len());
    for (b, basis) in BASES.into_iter().enumerate() {
        let symbolic = rip::peel_symbolic(&to_native(&hadamard_circuit(d, op, Time::Symbolic, basis)?)?);
        let buf = pool.pop().unwrap_or_default();
        let mut writer = rip::PayloadWriter::with_buffer(&symbolic.template, times.len(), buf)?;
        for &t in times {
            symbolic.write_row_at(&mut writer, t)?;
        }
        let first = b * times.len();
        out.push(Payload { bytes: writer.finish()?, circuit_ids: (first..first + times.len()).collect() });
    }
    Ok(out)
}

/// Deserializes payloads and stitches every row, returning executables in
/// circuit order.
pub fn load(payloads: &[Payload]) -> Result<Vec<Executable>> {
    let total: usize = payloads.iter().map(|p| p.circuit_ids.len()).sum();
    let mut slots: Vec<Option<Executable>> = vec![None; total];
    for p in payloads {
        let (template, table) = rip::deserialize(&p.bytes)?;
        if table.len() != p.circuit_ids.len() {
            return Err(PceError::Payload(format!(
                "payload holds {} rows but lists {} circuits",
                table.len(),
                p.circuit_ids.len()
            )));
        }
        for (row, &id) in p.circuit_ids.iter().enumerate() {
            let slot = slots
                .get_mut(id)
                .ok_or_else(|| PceError::Payload(format!("circuit id {id} out of range")))?;
            *slot = Some(stitch_row(&template, &table, row)?);
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| PceError::Payload(format!("circuit {i} missing from payloads"))))
        .collect()
}

/// Ancilla `<Z>` per executable: exact, or sampled from `shots` with one
/// random stream per circuit index.
pub fn measure(executables: &[Executable], shots: Option<u64>, seed: u64) -> Result<Vec<f64>> {
    executables
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let p0 = simulate(e, 0)?;
            match shots {
                None => Ok(2.0 * p0 - 1.0),
                Some(shots) => {
                    let (n0, n1) = sample(p0, shots, &mut circuit_rng(seed, i as u64))?;
                    Ok(z_estimate(n0, n1))
                }
            }
        })
        .collect()
}

/// Splits basis-major `<Z>` values into Re and Im.
pub fn series_from_z(times: &[f64], z: &[f64], shots: Option<u64>, seed: u64) -> Result<CorrelationSeries> {
    let n = times.len();
    if z.len() != 2 * n {
        return Err(PceError::ParameterCount { expected: 2 * n, got: z.len() });
    }
    Ok(CorrelationSeries {
        times: times.to_vec(),
        re: z[..n].to_vec(),
        im: z[n..].to_vec(),
        shots,
        seed,
        metadata: BTreeMap::new(),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub decomposition: CartanDecomposition,
    pub series: CorrelationSeries,
    pub report: ProfileReport,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of the samples after the warm-up run.
fn timed_median(v: Vec<f64>) -> f64 {
    median(v.into_iter().skip(1).collect())
}

fn seconds_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[derive(Default)]
struct Samples {
    compile: Vec<f64>,
    load: Vec<f64>,
    quantum: Vec<f64>,
    post: Vec<f64>,
}

/// Runs the configured paths `repetitions` times after one warm-up run and
/// reports median timings.
/// With both paths the CSV outputs must agree byte for byte.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let hamiltonian = build_model(&config.model)?;
    let start = Instant::now();
    let cartan_config = CartanConfig { seed: config.seed, ..config.cartan.clone() };
    let mut decomposition = optimize(&hamiltonian, &cartan_config)?;
    let cartan_seconds = seconds_since(start);
    decomposition.metadata.insert("model".into(), config.model.kind.to_string());
    decomposition.metadata.insert("sites".into(), config.model.sites.to_string());

    let op = first_site_x(config.model.sites)?;
    let times = time_grid(config.time_points, config.t_max);
    let shots = config.shots();
    let paths = config.paths();

    let mut samples: Vec<Samples> = paths.iter().map(|_| Samples::default()).collect();
    let mut last: Vec<Option<(CorrelationSeries, String, usize)>> = vec![None; paths.len()];
    // Repetition 0 is an untimed warm-up. Payload buffers are recycled across
    // repetitions on both paths, as a control system reuses its transfer
    // buffers, so page-fault cost does not depend on allocator history.
    let mut pools: Vec<Vec<Vec<u8>>> = vec![Vec::new(); paths.len()];
    for _ in 0..=config.repetitions {
        for (pi, path) in paths.iter().enumerate() {
            let s = &mut samples[pi];
            let t0 = Instant::now();
            let payloads = match path {
                Path::NoPce => compile_no_pce_with(&decomposition, &op, &times, &mut pools[pi])?,
                Path::Pce => compile_pce_with(&decomposition, &op, &times, &mut pools[pi])?,
            };
            s.compile.push(seconds_since(t0));

            let t0 = Instant::now();
            let executables = load(&payloads)?;
            s.load.push(seconds_since(t0));

            let t0 = Instant::now();
            let z = measure(&executables, shots, config.seed)?;
            s.quantum.push(seconds_since(t0));

            let t0 = Instant::now();
            let series = series_from_z(&times, &z, shots, config.seed)?;
            let csv = series.to_csv();
            s.post.push(seconds_since(t0));
            last[pi] = Some((series, csv, payloads.len()));
            pools[pi].extend(payloads.into_iter().map(|p| p.bytes));
        }
    }

    let results: Vec<(CorrelationSeries, String, usize)> =
        last.into_iter().map(|r| r.expect("at least one repetition")).collect();
    if let [(_, a, _), (_, b, _)] = results.as_slice() {
        if a != b {
            let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(0);
            return Err(PceError::PathMismatch(line.saturating_sub(1)));
        }
    }

    let mut no_pce = None;
    let mut pce = None;
    let mut templates = None;
    for (pi, path) in paths.iter().enumerate() {
        let s = std::mem::take(&mut samples[pi]);
        let times = PathTimes::new(
            cartan_seconds,
            timed_median(s.compile),
            timed_median(s.load),
            timed_median(s.quantum),
            timed_median(s.post),
        );
        match path {
            Path::NoPce => no_pce = Some(times),
            Path::Pce => {
                pce = Some(times);
                templates = Some(results[pi].2);
            }
        }
    }

    let mut series = results.into_iter().last().expect("at least one path").0;
    series.metadata.insert("model".into(), config.model.kind.to_string());
    series.metadata.insert("sites".into(), config.model.sites.to_string());
    series.metadata.insert("mode".into(), config.mode.to_string());
    series.metadata.insert("observable".into(), format!("A = B = {op}"));
    series.metadata.insert("couplings".into(), serde_json::to_string(&config.model.couplings)?);

    let mut report = ProfileReport::new(
        config.model.kind,
        config.model.sites,
        config.time_points,
        config.repetitions,
        no_pce,
        pce,
    );
    report.templates = templates;
    Ok(ExperimentOutput { decomposition, series, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        assert_eq!(time_grid(1, 5.0), vec![0.0]);
        assert_eq!(time_grid(3, 5.0), vec![0.0, 2.5, 5.0]);
        assert!(time_grid(0, 1.0).is_empty());
    }

    #[test]
    fn median_of_samples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn mode_parsing() {
        for m in [Mode::Pce, Mode::NoPce, Mode::Both, Mode::Exact] {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(ModelSpec::new(crate::model::ModelKind::Tfxy, 2));
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.time_points = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.shots = 0;
        assert!(c.validate().is_err());
        c.mode = Mode::Exact;
        assert!(c.validate().is_ok());
        let mut c = base;
        c.model.sites = 1;
        assert!(c.validate().is_err());
    }
}
