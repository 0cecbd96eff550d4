//! Emulated control stack: stitching, statevector simulation, shot sampling
//! and the exact-diagonalization reference.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::linalg::{self, HermitianEvolution, C64};
use crate::pauli::{PauliString, PauliSum};
use crate::rip::{CircuitTemplate, ParameterTable, TemplateKey};
use crate::transpile::NativeOp;

pub const ED_MAX_QUBITS: usize = 10;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub template: TemplateKey,
    pub row: Option<usize>,
}

/// Fully bound native instruction stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Executable {
    pub n_qubits: usize,
    pub ops: Vec<NativeOp<f64>>,
    pub provenance: Provenance,
}

impl Executable {
    /// Canonical byte image: per op `opcode, q0, q1, phase` (phase 0 for non-VZ).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 11 * self.ops.len());
        out.extend_from_slice(&(self.n_qubits as u16).to_le_bytes());
        for op in &self.ops {
            let (code, q0, q1, phase) = match *op {
                NativeOp::Vz { qubit, phase } => (0u8, qubit, 0xFF, phase),
                NativeOp::X90 { qubit } => (1, qubit, 0xFF, 0.0),
                NativeOp::Cz { a, b } => (2, a, b, 0.0),
                NativeOp::Measure { qubit } => (3, qubit, 0xFF, 0.0),
            };
            out.extend_from_slice(&[code, q0 as u8, q1 as u8]);
            out.extend_from_slice(&phase.to_le_bytes());
        }
        out
    }
}

/// Binds `row` into the template's VZ slots.
pub fn stitch(template: &CircuitTemplate, row: &[f64]) -> Result<Executable> {
    if row.len() != template.n_slots {
        return Err(PceError::ParameterCount { expected: template.n_slots, got: row.len() });
    }
    let ops = template.ops.iter().map(|op| op.map_phase(|s| row[s as usize])).collect();
    Ok(Executable {
        n_qubits: template.n_qubits,
        ops,
        provenance: Provenance { template: template.key(), row: None },
    })
}

/// Stitches row `index` of `table`.
pub fn stitch_row(template: &CircuitTemplate, table: &ParameterTable, index: usize) -> Result<Executable> {
    let row = table
        .row(index)
        .ok_or_else(|| PceError::Payload(format!("row {index} out of range for {} rows", table.len())))?;
    let mut e = stitch(template, row)?;
    e.provenance.row = Some(index);
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits >= usize::BITS as usize - 1 || n_qubits > 30 {
            return Err(PceError::DimensionGuard { max: 30, got: n_qubits });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(PceError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply(&mut self, op: &NativeOp<f64>) -> Result<()> {
        match *op {
            NativeOp::Vz { qubit, phase } => {
                self.check(qubit)?;
                let lo = C64::from_polar(1.0, -phase / 2.0);
                let hi = lo.conj();
                let bit = 1usize << qubit;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & bit == 0 { lo } else { hi };
                }
            }
            NativeOp::X90 { qubit } => {
                self.check(qubit)?;
                linalg::apply_single(&mut self.amps, qubit, &linalg::rx(FRAC_PI_2));
            }
            NativeOp::Cz { a, b } => {
                self.check(a)?;
                self.check(b)?;
                linalg::apply_cz(&mut self.amps, a, b);
            }
            NativeOp::Measure { qubit } => self.check(qubit)?,
        }
        Ok(())
    }

    /// Probability that `qubit` reads 0.
    pub fn p0(&self, qubit: usize) -> Result<f64> {
        self.check(qubit)?;
        let bit = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }
}

/// Runs `e` from |0…0> and returns the probability of reading 0 on `ancilla`.
/// The norm is checked after every instruction.
pub fn simulate(e: &Executable, ancilla: usize) -> Result<f64> {
    let mut sv = Statevector::zero(e.n_qubits)?;
    sv.check(ancilla)?;
    for op in &e.ops {
        sv.apply(op)?;
        let drift = (sv.norm() - 1.0).abs();
        if drift > NORM_TOL {
            return Err(PceError::NormDrift(drift));
        }
    }
    Ok(sv.p0(ancilla)?.clamp(0.0, 1.0))
}

/// Independent generator for one circuit of an experiment.
pub fn circuit_rng(seed: u64, circuit_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(circuit_index);
    rng
}

/// Draws `(n0, n1)` with `n0 ~ Binomial(shots, p0)`.
pub fn sample(p0: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(PceError::InvalidProbability(p0));
    }
    let dist = Binomial::new(shots, p0).map_err(|_| PceError::InvalidProbability(p0))?;
    let n0 = dist.sample(rng);
    Ok((n0, shots - n0))
}

pub fn z_estimate(n0: u64, n1: u64) -> f64 {
    (n0 as f64 - n1 as f64) / (n0 + n1) as f64
}

/// `C(t) = <Φ| U† B U A |Φ>` with `U = exp(-iHt)` and `|Φ> = |0…0>`.
pub struct EdOracle {
    evolution: HermitianEvolution,
    b: DMatrix<C64>,
    a_phi: DVector<C64>,
    phi: DVector<C64>,
}

impl EdOracle {
    pub fn new(h: &PauliSum, a: &PauliString, b: &PauliString) -> Result<Self> {
        let n = h.n_qubits();
        if n > ED_MAX_QUBITS {
            return Err(PceError::DimensionGuard { max: ED_MAX_QUBITS, got: n });
        }
        for p in [a, b] {
            if p.n_qubits() != n {
                return Err(PceError::QubitMismatch { left: n, right: p.n_qubits() });
            }
        }
        let dim = 1usize << n;
        let mut phi = DVector::zeros(dim);
        phi[0] = C64::new(1.0, 0.0);
        let a_phi = linalg::pauli_matrix(a)? * &phi;
        Ok(Self {
            evolution: HermitianEvolution::from_sum(h)?,
            b: linalg::pauli_matrix(b)?,
            a_phi,
            phi,
        })
    }

    pub fn correlation(&self, t: f64) -> C64 {
        let u_a_phi = self.evolution.evolve(&self.a_phi, t);
        let u_phi = self.evolution.evolve(&self.phi, t);
        u_phi.dotc(&(&self.b * u_a_phi))
    }
}

pub fn ed_oracle(h: &PauliSum, a: &PauliString, b: &PauliString, t: f64) -> Result<C64> {
    Ok(EdOracle::new(h, a, b)?.correlation(t))
}

/// Sampled or exact `C(t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `None` for exact expectation values.
    pub shots: Option<u64>,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{},{},{}", self.times[i], self.re[i], self.im[i]);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let series: Self = serde_json::from_str(s)?;
        if series.re.len() != series.times.len() || series.im.len() != series.times.len() {
            return Err(PceError::Payload("correlation vectors differ in length".into()));
        }
        Ok(series)
    }
}
