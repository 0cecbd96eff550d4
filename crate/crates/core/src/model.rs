//! Spin-chain Hamiltonians with open boundaries.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

/// Random couplings closer to zero than this are redrawn.
pub const MIN_RANDOM_COUPLING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfxy,
    Heisenberg,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Tfxy => "TFXY",
            ModelKind::Heisenberg => "Heisenberg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Tfxy => "tfxy",
            ModelKind::Heisenberg => "heisenberg",
        })
    }
}

impl FromStr for ModelKind {
    type Err = PceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfxy" => Ok(ModelKind::Tfxy),
            "heisenberg" => Ok(ModelKind::Heisenberg),
            other => Err(PceError::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// TFXY coefficients. Heisenberg uses only the exchange constant `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Couplings {
    /// The same `jx`, `jy`, `b` on every bond and site.
    Uniform { jx: f64, jy: f64, b: f64 },
    /// Per-bond `jx`, `jy` (length N-1) and per-site `b` (length N).
    Explicit { jx: Vec<f64>, jy: Vec<f64>, b: Vec<f64> },
    /// Uniform in [-1, 1] with |value| >= 0.05, drawn bond by bond
    /// (`jx_i`, `jy_i`) and then site by site (`b_i`).
    Random { seed: u64 },
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings::Uniform { jx: 1.0, jy: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub sites: usize,
    pub couplings: Couplings,
    /// Heisenberg exchange constant.
    pub j: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, sites: usize) -> Self {
        Self { kind, sites, couplings: Couplings::default(), j: -1.0 }
    }
}

/// Per-bond and per-site TFXY coefficients `(jx, jy, b)`.
pub fn tfxy_coefficients(sites: usize, couplings: &Couplings) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let bonds = sites.saturating_sub(1);
    match couplings {
        Couplings::Uniform { jx, jy, b } => Ok((vec![*jx; bonds], vec![*jy; bonds], vec![*b; sites])),
        Couplings::Explicit { jx, jy, b } => {
            if jx.len() != bonds || jy.len() != bonds || b.len() != sites {
                return Err(PceError::Config(format!(
                    "explicit couplings need {bonds} bonds and {sites} fields, got {}/{}/{}",
                    jx.len(),
                    jy.len(),
                    b.len()
                )));
            }
            Ok((jx.clone(), jy.clone(), b.clone()))
        }
        Couplings::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = || loop {
                let v: f64 = rng.gen_range(-1.0..=1.0);
                if v.abs() >= MIN_RANDOM_COUPLING {
                    break v;
                }
            };
            let mut jx = Vec::with_capacity(bonds);
            let mut jy = Vec::with_capacity(bonds);
            for _ in 0..bonds {
                jx.push(draw());
                jy.push(draw());
            }
            let b = (0..sites).map(|_| draw()).collect();
            Ok((jx, jy, b))
        }
    }
}

fn pair(n: usize, i: usize, p: Pauli) -> Result<PauliString> {
    PauliString::from_sites(n, &[(i, p), (i + 1, p)])
}

pub fn build_model(spec: &ModelSpec) -> Result<PauliSum> {
    let n = spec.sites;
    if n < 2 {
        return Err(PceError::Config(format!("a chain needs at least 2 sites, got {n}")));
    }
    let mut h = PauliSum::new(n);
    let re = |v: f64| Complex64::new(v, 0.0);
    match spec.kind {
        ModelKind::Tfxy => {
            let (jx, jy, b) = tfxy_coefficients(n, &spec.couplings)?;
            for i in 0..n - 1 {
                h.add_term(pair(n, i, Pauli::X)?, re(jx[i]))?;
                h.add_term(pair(n, i, Pauli::Y)?, re(jy[i]))?;
            }
            for (i, &bi) in b.iter().enumerate() {
                h.add_term(PauliString::from_sites(n, &[(i, Pauli::Z)])?, re(bi))?;
            }
        }
        ModelKind::Heisenberg => {
            for i in 0..n - 1 {
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    h.add_term(pair(n, i, p)?, re(spec.j))?;
                }
            }
        }
    }
    Ok(h)
}
