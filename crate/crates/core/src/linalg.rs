//! Dense helpers: 2x2 gate algebra, state-vector kernels and Hermitian
//! exponentials for small systems. Qubit `q` is bit `q` of the basis index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{PceError, Result};
use crate::pauli::{PauliString, PauliSum};

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];

pub const DENSE_MAX_QUBITS: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity2() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn adjoint2(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `RZ(a) = exp(-i a Z / 2)`.
pub fn rz(a: f64) -> Mat2 {
    [[C64::from_polar(1.0, -a / 2.0), ZERO], [ZERO, C64::from_polar(1.0, a / 2.0)]]
}

/// `RX(a) = exp(-i a X / 2)`.
pub fn rx(a: f64) -> Mat2 {
    let (s, co) = (a / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

/// `RY(a) = exp(-i a Y / 2)`.
pub fn ry(a: f64) -> Mat2 {
    let (s, co) = (a / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn hadamard() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
}

pub fn pauli_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Mat2 {
    [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]]
}

pub fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

/// Deviation of `u† u` from the identity (max entry).
pub fn unitarity_error2(u: &Mat2) -> f64 {
    let p = mul2(&adjoint2(u), u);
    let mut err: f64 = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { ONE } else { ZERO };
            err = err.max((v - target).norm());
        }
    }
    err
}

/// Frobenius distance between `a` and `b` after removing the best global phase.
pub fn phase_distance2(a: &Mat2, b: &Mat2) -> f64 {
    let mut ov = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            ov += b[i][j].conj() * a[i][j];
        }
    }
    let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
    let mut d = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            d += (a[i][j] - ph * b[i][j]).norm_sqr();
        }
    }
    d.sqrt()
}

pub fn apply_single(state: &mut [C64], q: usize, m: &Mat2) {
    let bit = 1usize << q;
    for i in 0..state.len() {
        if i & bit == 0 {
            let a0 = state[i];
            let a1 = state[i | bit];
            state[i] = m[0][0] * a0 + m[0][1] * a1;
            state[i | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Applies `m` to `target` on the subspace where `control` is |1>.
pub fn apply_controlled(state: &mut [C64], control: usize, target: usize, m: &Mat2) {
    let cb = 1usize << control;
    let tb = 1usize << target;
    for i in 0..state.len() {
        if i & cb != 0 && i & tb == 0 {
            let a0 = state[i];
            let a1 = state[i | tb];
            state[i] = m[0][0] * a0 + m[0][1] * a1;
            state[i | tb] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

pub fn apply_cz(state: &mut [C64], a: usize, b: usize) {
    let mask = (1usize << a) | (1usize << b);
    for (i, amp) in state.iter_mut().enumerate() {
        if i & mask == mask {
            *amp = -*amp;
        }
    }
}

pub fn check_dense(n_qubits: usize) -> Result<usize> {
    if n_qubits > DENSE_MAX_QUBITS {
        return Err(PceError::DimensionGuard { max: DENSE_MAX_QUBITS, got: n_qubits });
    }
    Ok(1usize << n_qubits)
}

/// Dense matrix of a Pauli string: `P|b> = i^{|x&z|} (-1)^{|b&z|} |b ^ x>`.
pub fn pauli_matrix(p: &PauliString) -> Result<DMatrix<C64>> {
    let dim = check_dense(p.n_qubits())?;
    let mut m = DMatrix::zeros(dim, dim);
    let base = crate::pauli::Phase::from_exponent(p.y_count()).to_complex();
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    for b in 0..dim {
        let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        m[(b ^ x, b)] = base * sign;
    }
    Ok(m)
}

pub fn sum_matrix(s: &PauliSum) -> Result<DMatrix<C64>> {
    let dim = check_dense(s.n_qubits())?;
    let mut m = DMatrix::zeros(dim, dim);
    for (p, coef) in s.iter() {
        m += pauli_matrix(p)? * *coef;
    }
    Ok(m)
}

/// Eigendecomposition of a Hermitian matrix, reused for `exp(-iHt)` at many `t`.
#[derive(Clone, Debug)]
pub struct HermitianEvolution {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl HermitianEvolution {
    pub fn new(h: DMatrix<C64>) -> Self {
        let eig = nalgebra::SymmetricEigen::new(h);
        Self { eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors }
    }

    pub fn from_sum(s: &PauliSum) -> Result<Self> {
        Ok(Self::new(sum_matrix(s)?))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn phases(&self, t: f64) -> DVector<C64> {
        self.eigenvalues.map(|e| C64::from_polar(1.0, -e * t))
    }

    /// `exp(-iHt)` as a dense matrix.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        let ph = self.phases(t);
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= ph[j];
        }
        scaled * v.adjoint()
    }

    /// `exp(-iHt) psi`.
    pub fn evolve(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        let v = &self.eigenvectors;
        let coeffs = v.adjoint() * psi;
        let ph = self.phases(t);
        v * coeffs.component_mul(&ph)
    }
}

/// Frobenius norm of `a - b`; an upper bound on the spectral norm.
pub fn frobenius_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm()
}
