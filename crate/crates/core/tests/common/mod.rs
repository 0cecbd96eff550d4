//! Dense-matrix oracles shared by the integration tests. Nothing here calls
//! into the library's own matrix code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;

use pce_core::pauli::{PauliString, PauliSum};

pub type M = DMatrix<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn letter(ch: char) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match ch {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad letter {ch}"),
    }
}

/// Site 0 is the least significant bit, so it is the rightmost Kronecker factor.
pub fn kron_string(text: &str) -> M {
    text.chars().fold(M::identity(1, 1), |acc, ch| letter(ch).kronecker(&acc))
}

pub fn dense(p: &PauliString) -> M {
    kron_string(&p.to_string())
}

pub fn dense_sum(s: &PauliSum) -> M {
    let dim = 1usize << s.n_qubits();
    let mut m = M::zeros(dim, dim);
    for (p, coef) in s.iter() {
        m += dense(p) * *coef;
    }
    m
}

/// All Pauli strings on `n` qubits as text.
pub fn all_strings(n: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| ['I', 'X', 'Y', 'Z'].into_iter().map(move |ch| format!("{s}{ch}")))
            .collect();
    }
    out
}

/// `exp(a)` by scaling and squaring with a Taylor series.
pub fn expm(a: &M) -> M {
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / C::new(2f64.powi(s), 0.0);
    let n = a.nrows();
    let mut term = M::identity(n, n);
    let mut sum = M::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / C::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i h t)`.
pub fn evolve(h: &M, t: f64) -> M {
    expm(&(h * c(0.0, -t)))
}

pub fn spectral_norm(a: &M) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

/// `min_φ ||a - e^{iφ} b||_F`.
pub fn phase_free_distance(a: &M, b: &M) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 1e-300 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    (a - b * phase).norm()
}

/// Haar-random `n x n` unitary via QR of a Ginibre matrix.
pub fn haar<R: Rng>(n: usize, rng: &mut R) -> M {
    let g = M::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = d / d.norm();
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `C(t) = <0| e^{iHt} B e^{-iHt} A |0>` computed densely.
pub fn correlation(h: &M, a: &M, b: &M, t: f64) -> C {
    let u = evolve(h, t);
    let m = u.adjoint() * b * &u * a;
    m[(0, 0)]
}
