//! KHK decomposition of a spin Hamiltonian.
//!
//! The Hamiltonian terms generate a Lie algebra `g` (spanned by Pauli strings).
//! The involution `θ(iP) = -(iP)^T` splits `g` into `k` (odd number of Y) and
//! `m` (even number of Y), and a maximal abelian `h ⊂ m` is grown greedily.
//! Minimizing `f(K) = <K v K†, H>` over `K = Π_j exp(i b_j k_j)` gives
//! `K† H K ∈ h`, hence `exp(-iHt) = K exp(-i Σ a_j h_j t) K†`.

mod bfgs;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bfgs::{minimize, BfgsOptions, BfgsResult};

use crate::error::{PceError, Result};
use crate::pauli::{PauliString, PauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgebraRole {
    G,
    K,
    M,
    H,
}

/// Ordered set of Pauli strings spanning one of `g`, `k`, `m`, `h`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraBasis {
    pub role: AlgebraRole,
    pub elements: Vec<PauliString>,
}

impl AlgebraBasis {
    fn sorted(role: AlgebraRole, mut elements: Vec<PauliString>) -> Self {
        elements.sort();
        elements.dedup();
        Self { role, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, p: &PauliString) -> bool {
        self.elements.binary_search(p).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PauliString> {
        self.elements.iter()
    }
}

fn check_hamiltonian(h: &PauliSum) -> Result<()> {
    if h.strings().all(|p| p.is_identity()) {
        return Err(PceError::InvalidHamiltonian("no non-identity terms".into()));
    }
    if !h.is_hermitian(1e-12) {
        return Err(PceError::InvalidHamiltonian("coefficients must be real".into()));
    }
    Ok(())
}

/// Smallest set of Pauli strings containing the Hamiltonian terms and closed
/// under commutators.
pub fn generate_closure(hamiltonian: &PauliSum, max_dim: usize) -> Result<AlgebraBasis> {
    check_hamiltonian(hamiltonian)?;
    let mut members: BTreeSet<PauliString> = BTreeSet::new();
    let mut order: Vec<PauliString> = Vec::new();
    let mut queue: VecDeque<PauliString> = VecDeque::new();
    for p in hamiltonian.strings().filter(|p| !p.is_identity()) {
        if members.insert(*p) {
            queue.push_back(*p);
        }
    }
    while let Some(p) = queue.pop_front() {
        order.push(p);
        for q in &order {
            if let Some((_, r)) = p.commutator(q)? {
                if members.insert(r) {
                    if members.len() > max_dim {
                        return Err(PceError::ClosureTooLarge { max_dim });
                    }
                    queue.push_back(r);
                }
            }
        }
    }
    if members.len() > max_dim {
        return Err(PceError::ClosureTooLarge { max_dim });
    }
    Ok(AlgebraBasis::sorted(AlgebraRole::G, members.into_iter().collect()))
}

fn check_relation(
    a: &AlgebraBasis,
    b: &AlgebraBasis,
    target: &AlgebraBasis,
    name: &'static str,
) -> Result<()> {
    for p in a.iter() {
        for q in b.iter() {
            if let Some((_, r)) = p.commutator(q)? {
                if !target.contains(&r) {
                    return Err(PceError::CartanRelation {
                        left: p.to_string(),
                        right: q.to_string(),
                        result: r.to_string(),
                        expected: name,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Splits `g` by Y-parity and checks `[k,k] ⊆ k`, `[m,m] ⊆ k`, `[k,m] ⊆ m`.
pub fn split_involution(g: &AlgebraBasis) -> Result<(AlgebraBasis, AlgebraBasis)> {
    let (odd, even): (Vec<_>, Vec<_>) = g.iter().partition(|p| p.y_count() % 2 == 1);
    let k = AlgebraBasis::sorted(AlgebraRole::K, odd);
    let m = AlgebraBasis::sorted(AlgebraRole::M, even);
    check_relation(&k, &k, &k, "k")?;
    check_relation(&m, &m, &k, "k")?;
    check_relation(&k, &m, &m, "m")?;
    Ok((k, m))
}

/// Greedy maximal commuting subset of `m` that contains `seed`, swept in
/// canonical order.
pub fn find_abelian(m: &AlgebraBasis, seed: &PauliString) -> Result<AlgebraBasis> {
    if !m.contains(seed) {
        return Err(PceError::SeedNotInM(seed.to_string()));
    }
    let mut h = vec![*seed];
    for p in m.iter() {
        if p != seed && h.iter().all(|q| q.commutes_unchecked(p)) {
            h.push(*p);
        }
    }
    Ok(AlgebraBasis::sorted(AlgebraRole::H, h))
}

/// `exp(iθp) q exp(-iθp)`.
pub fn adjoint_rotate(p: &PauliString, theta: f64, q: &PauliSum) -> Result<PauliSum> {
    if p.n_qubits() != q.n_qubits() {
        return Err(PceError::QubitMismatch { left: p.n_qubits(), right: q.n_qubits() });
    }
    let (s, c) = (2.0 * theta).sin_cos();
    let mut out = PauliSum::with_prune(q.n_qubits(), q.prune_threshold());
    for (term, coef) in q.iter() {
        if term.commutes_unchecked(p) {
            out.add_term(*term, *coef)?;
        } else {
            let (phase, r) = p.multiply(term)?;
            out.add_term(*term, coef * c)?;
            out.add_term(r, coef * phase.to_complex() * Complex64::new(0.0, s))?;
        }
    }
    Ok(out)
}

/// `γ` in `v = Σ_j γ^j h_j`.
pub const GAMMA: f64 = std::f64::consts::PI / std::f64::consts::E;

/// Everything the cost function needs besides the angles.
#[derive(Debug, Clone)]
pub struct CostContext {
    pub k: Vec<PauliString>,
    pub h: Vec<PauliString>,
    pub hamiltonian: PauliSum,
    v: PauliSum,
}

impl CostContext {
    pub fn new(k: Vec<PauliString>, h: Vec<PauliString>, hamiltonian: PauliSum) -> Result<Self> {
        let n = hamiltonian.n_qubits();
        if h.is_empty() {
            return Err(PceError::InvalidHamiltonian("empty abelian subalgebra".into()));
        }
        let mut v = PauliSum::new(n);
        let mut w = 1.0;
        for p in &h {
            w *= GAMMA;
            v.add_term(*p, Complex64::new(w, 0.0))?;
        }
        for p in k.iter() {
            if p.n_qubits() != n {
                return Err(PceError::QubitMismatch { left: n, right: p.n_qubits() });
            }
        }
        Ok(Self { k, h, hamiltonian, v })
    }

    pub fn v(&self) -> &PauliSum {
        &self.v
    }

    fn check_angles(&self, angles: &[f64]) -> Result<()> {
        if angles.len() != self.k.len() {
            return Err(PceError::ParameterCount { expected: self.k.len(), got: angles.len() });
        }
        Ok(())
    }

    /// `K v K†` for `K = exp(i b_1 k_1) ... exp(i b_n k_n)`.
    pub fn conjugated_v(&self, angles: &[f64]) -> Result<PauliSum> {
        self.check_angles(angles)?;
        let mut w = self.v.clone();
        for (p, b) in self.k.iter().zip(angles).rev() {
            w = adjoint_rotate(p, *b, &w)?;
        }
        Ok(w)
    }

    /// `K† H K`.
    pub fn rotated_hamiltonian(&self, angles: &[f64]) -> Result<PauliSum> {
        self.check_angles(angles)?;
        let mut w = self.hamiltonian.clone();
        for (p, b) in self.k.iter().zip(angles) {
            w = adjoint_rotate(p, -*b, &w)?;
        }
        Ok(w)
    }

    pub fn cost(&self, angles: &[f64]) -> Result<f64> {
        Ok(self.conjugated_v(angles)?.inner(&self.hamiltonian)?.re)
    }

    /// Value and analytic gradient.
    ///
    /// With `W_j = E_j W_{j+1} E_j†` (`W_{n+1} = v`) and
    /// `H_{j+1} = E_j† H_j E_j` (`H_1 = H`), `∂f/∂b_j = <i[k_j, W_j], H_j>`.
    pub fn cost_and_gradient(&self, angles: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_angles(angles)?;
        let n = self.k.len();
        let mut ws = Vec::with_capacity(n);
        let mut w = self.v.clone();
        for (p, b) in self.k.iter().zip(angles).rev() {
            w = adjoint_rotate(p, *b, &w)?;
            ws.push(w.clone());
        }
        ws.reverse();
        let value = w.inner(&self.hamiltonian)?.re;

        let mut grad = Vec::with_capacity(n);
        let mut hj = self.hamiltonian.clone();
        for (j, (p, b)) in self.k.iter().zip(angles).enumerate() {
            let mut g = 0.0;
            for (term, coef) in ws[j].iter() {
                if term.commutes_unchecked(p) {
                    continue;
                }
                let (phase, r) = p.multiply(term)?;
                let other = hj.coefficient(&r);
                if other.norm() == 0.0 {
                    continue;
                }
                // i [k, c Q] = 2i c (phase) r
                let lifted = Complex64::new(0.0, 2.0) * phase.to_complex() * coef;
                g += (lifted.conj() * other).re;
            }
            grad.push(g);
            if j + 1 < n {
                hj = adjoint_rotate(p, -*b, &hj)?;
            }
        }
        Ok((value, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanConfig {
    pub tolerance: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for CartanConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            restarts: 5,
            max_iterations: 10_000,
            grad_tol: 1e-10,
            max_dim: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFactor {
    pub pauli: PauliString,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTerm {
    pub pauli: PauliString,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanDecomposition {
    pub n_qubits: usize,
    pub k_factors: Vec<KFactor>,
    pub h_terms: Vec<HTerm>,
    pub residual: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CartanDecomposition {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Algebra stages shared by [`optimize`] and diagnostics.
#[derive(Debug, Clone)]
pub struct CartanAlgebra {
    pub g: AlgebraBasis,
    pub k: AlgebraBasis,
    pub m: AlgebraBasis,
    pub h: AlgebraBasis,
}

impl CartanAlgebra {
    pub fn new(hamiltonian: &PauliSum, max_dim: usize) -> Result<Self> {
        let g = generate_closure(hamiltonian, max_dim)?;
        let (k, m) = split_involution(&g)?;
        let seed = hamiltonian
            .strings()
            .find(|p| !p.is_identity())
            .copied()
            .ok_or_else(|| PceError::InvalidHamiltonian("no non-identity terms".into()))?;
        let h = find_abelian(&m, &seed)?;
        Ok(Self { g, k, m, h })
    }
}

fn project(rotated: &PauliSum, h: &[PauliString]) -> (Vec<HTerm>, f64) {
    let terms = h
        .iter()
        .map(|p| HTerm { pauli: *p, coefficient: rotated.coefficient(p).re })
        .collect();
    let off: f64 = rotated
        .iter()
        .filter(|(p, _)| h.binary_search(p).is_err())
        .map(|(_, c)| c.norm_sqr())
        .sum();
    (terms, off.sqrt())
}

struct Attempt {
    index: usize,
    angles: Vec<f64>,
    value: f64,
    residual: f64,
}

/// Full KHK pipeline: closure, split, abelian subalgebra, then BFGS restarts.
pub fn optimize(hamiltonian: &PauliSum, config: &CartanConfig) -> Result<CartanDecomposition> {
    let algebra = CartanAlgebra::new(hamiltonian, config.max_dim)?;
    let ctx = CostContext::new(
        algebra.k.elements.clone(),
        algebra.h.elements.clone(),
        hamiltonian.clone(),
    )?;
    let n = hamiltonian.n_qubits();

    if ctx.k.is_empty() {
        let (h_terms, residual) = project(hamiltonian, &ctx.h);
        if residual > config.tolerance {
            return Err(PceError::Convergence { best_residual: residual });
        }
        return Ok(CartanDecomposition {
            n_qubits: n,
            k_factors: Vec::new(),
            h_terms,
            residual,
            metadata: BTreeMap::new(),
        });
    }

    let opts = BfgsOptions { grad_tol: config.grad_tol, max_iterations: config.max_iterations };
    let attempts: Vec<Result<Attempt>> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(index as u64);
            let x0: Vec<f64> = (0..ctx.k.len())
                .map(|_| std::f64::consts::PI - rng.gen::<f64>() * std::f64::consts::TAU)
                .collect();
            let run = minimize(
                |x| ctx.cost_and_gradient(x).expect("angle count fixed by context"),
                &x0,
                &opts,
            );
            let rotated = ctx.rotated_hamiltonian(&run.x)?;
            let (_, residual) = project(&rotated, &ctx.h);
            Ok(Attempt { index, angles: run.x, value: run.value, residual })
        })
        .collect();

    let mut best: Option<Attempt> = None;
    let mut best_residual = f64::INFINITY;
    for attempt in attempts {
        let attempt = attempt?;
        best_residual = best_residual.min(attempt.residual);
        if attempt.residual > config.tolerance {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => attempt.value < b.value || (attempt.value == b.value && attempt.index < b.index),
        };
        if better {
            best = Some(attempt);
        }
    }
    let best = best.ok_or(PceError::Convergence { best_residual })?;

    let rotated = ctx.rotated_hamiltonian(&best.angles)?;
    let (h_terms, residual) = project(&rotated, &ctx.h);
    let k_factors = ctx
        .k
        .iter()
        .zip(&best.angles)
        .map(|(p, b)| KFactor { pauli: *p, angle: *b })
        .collect();
    Ok(CartanDecomposition { n_qubits: n, k_factors, h_terms, residual, metadata: BTreeMap::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn texts(b: &AlgebraBasis) -> Vec<String> {
        b.iter().map(|p| p.to_string()).collect()
    }

    fn tfxy2() -> PauliSum {
        PauliSum::from_real(&[("XX", 1.0), ("YY", 1.0), ("ZI", 1.0), ("IZ", 1.0)]).unwrap()
    }

    #[test]
    fn single_qubit_closures() {
        let z = PauliSum::from_real(&[("Z", 1.0)]).unwrap();
        assert_eq!(texts(&generate_closure(&z, 10).unwrap()), ["Z"]);
        let xz = PauliSum::from_real(&[("X", 1.0), ("Z", 1.0)]).unwrap();
        assert_eq!(generate_closure(&xz, 10).unwrap().len(), 3);
    }

    #[test]
    fn closure_guard() {
        let xz = PauliSum::from_real(&[("X", 1.0), ("Z", 1.0)]).unwrap();
        assert!(matches!(generate_closure(&xz, 2), Err(PceError::ClosureTooLarge { max_dim: 2 })));
    }

    #[test]
    fn complex_hamiltonian_rejected() {
        let mut h = PauliSum::new(1);
        h.add_term(ps("X"), Complex64::new(0.0, 1.0)).unwrap();
        assert!(generate_closure(&h, 10).is_err());
    }

    #[test]
    fn tfxy2_split_and_abelian() {
        let g = generate_closure(&tfxy2(), 64).unwrap();
        let (k, m) = split_involution(&g).unwrap();
        let mut kt = texts(&k);
        kt.sort();
        assert_eq!(kt, ["XY", "YX"]);
        assert_eq!(m.len(), 4);
        let h = find_abelian(&m, &ps("XX")).unwrap();
        assert_eq!(texts(&h), ["XX", "YY"]);
        assert!(find_abelian(&m, &ps("XY")).is_err());
    }

    #[test]
    fn adjoint_rotate_examples() {
        let x = PauliSum::from_real(&[("X", 1.0)]).unwrap();
        assert_eq!(adjoint_rotate(&ps("X"), 0.7, &x).unwrap(), x);
        let z = PauliSum::from_real(&[("Z", 1.0)]).unwrap();
        let theta = 0.3f64;
        let r = adjoint_rotate(&ps("X"), theta, &z).unwrap();
        assert!((r.coefficient(&ps("Z")).re - (2.0 * theta).cos()).abs() < 1e-15);
        assert!((r.coefficient(&ps("Y")).re - (2.0 * theta).sin()).abs() < 1e-15);
        assert_eq!(adjoint_rotate(&ps("X"), 0.0, &z).unwrap(), z);
    }

    #[test]
    fn cost_at_zero_angles_is_weighted_h_overlap() {
        let h = PauliSum::from_real(&[("XX", 0.3), ("YY", -0.8), ("ZI", 1.0), ("IZ", 1.0)]).unwrap();
        let alg = CartanAlgebra::new(&h, 64).unwrap();
        let ctx = CostContext::new(alg.k.elements.clone(), alg.h.elements.clone(), h).unwrap();
        let expected = GAMMA * 0.3 + GAMMA * GAMMA * -0.8;
        assert!((ctx.cost(&vec![0.0; ctx.k.len()]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn one_qubit_z_is_trivial() {
        let h = PauliSum::from_real(&[("Z", 0.5)]).unwrap();
        let ctx = CostContext::new(vec![], vec![ps("Z")], h.clone()).unwrap();
        assert!((ctx.cost(&[]).unwrap() - GAMMA * 0.5).abs() < 1e-15);
        let d = optimize(&h, &CartanConfig::default()).unwrap();
        assert!(d.k_factors.is_empty());
        assert_eq!(d.h_terms, vec![HTerm { pauli: ps("Z"), coefficient: 0.5 }]);
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn tfxy2_converges() {
        let d = optimize(&tfxy2(), &CartanConfig::default()).unwrap();
        assert!(d.residual <= 1e-8, "residual {}", d.residual);
        assert_eq!(d.k_factors.len(), 2);
        assert_eq!(d.h_terms.len(), 2);
    }

    #[test]
    fn heisenberg2_is_abelian() {
        let h = PauliSum::from_real(&[("XX", -1.0), ("YY", -1.0), ("ZZ", -1.0)]).unwrap();
        let d = optimize(&h, &CartanConfig::default()).unwrap();
        assert!(d.k_factors.is_empty());
        assert!(d.residual <= 1e-8);
        assert_eq!(d.h_terms.len(), 3);
    }

    #[test]
    fn decomposition_json_round_trip() {
        let d = optimize(&tfxy2(), &CartanConfig::default()).unwrap();
        let back = CartanDecomposition::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
