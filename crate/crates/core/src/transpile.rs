//! Lowering to the native gate set: virtual-Z phases, fixed X90 pulses and CZ.
//!
//! Every maximal single-qubit run is fused and emitted as one U3 block
//! `VZ(λ-π/2) X90 VZ(π-θ) X90 VZ(φ-π/2)`, so the native structure depends only
//! on the input gate kinds and never on angle values.
//!
//! A run that contains one contiguous stretch of RZ gates keeps that stretch
//! as an additive term of a single VZ phase whenever the fixed gates around
//! it allow it (diagonal neighbour, or both neighbours of the form
//! `Z X90 Z`). This is how time slots survive symbolically; the same rule is
//! applied to bound circuits so both routes produce bit-identical phases.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::circuit::{slot_values_at, Circuit, Gate, Param, SlotInfo};
use crate::error::{PceError, Result};
use crate::linalg::{self, Mat2, C64};

const DEGENERATE: f64 = 1e-14;
const PATTERN_TOL: f64 = 1e-12;

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `(φ, θ, λ)` with `RZ(φ-π/2) X90 RZ(π-θ) X90 RZ(λ-π/2) ∝ u`.
///
/// `θ = 2 atan2(|u10|, |u00|)` in [0, π], which stays accurate near 0 and π
/// where `acos|u00|` does not. When θ is 0 or π only one phase combination is
/// determined and λ is set to 0.
pub fn zxzxz(u: &Mat2) -> Result<(f64, f64, f64)> {
    let err = linalg::unitarity_error2(u);
    if err.is_nan() || err > 1e-10 {
        return Err(PceError::NotUnitary(err));
    }
    let (cos_half, sin_half) = (u[0][0].norm(), u[1][0].norm());
    let theta = 2.0 * sin_half.atan2(cos_half);
    // Textbook U3 phases first; this product is U3(θ, φ-π/2, λ+π/2).
    let (phi, lam) = if sin_half < DEGENERATE {
        ((u[1][1] * u[0][0].conj()).arg(), 0.0)
    } else if cos_half < DEGENERATE {
        ((u[1][0] * (-u[0][1]).conj()).arg() + PI, 0.0)
    } else {
        let g = u[0][0].arg();
        let phi_std = u[1][0].arg() - g;
        let lam_std = (-u[0][1]).arg() - g;
        (phi_std + FRAC_PI_2, lam_std - FRAC_PI_2)
    };
    Ok((wrap_angle(phi), theta, wrap_angle(lam)))
}

/// Product `RZ(φ-π/2) X90 RZ(π-θ) X90 RZ(λ-π/2)`.
pub fn zxzxz_matrix(phi: f64, theta: f64, lam: f64) -> Mat2 {
    u3_block([lam - FRAC_PI_2, PI - theta, phi - FRAC_PI_2])
}

/// Matrix of a block given its three VZ phases in time order.
pub fn u3_block(phases: [f64; 3]) -> Mat2 {
    let x90 = linalg::rx(FRAC_PI_2);
    let mut m = linalg::rz(phases[0]);
    m = linalg::mul2(&x90, &m);
    m = linalg::mul2(&linalg::rz(phases[1]), &m);
    m = linalg::mul2(&x90, &m);
    linalg::mul2(&linalg::rz(phases[2]), &m)
}

/// A VZ phase: a number, or `offset + Σ run` where the run may hold slots.
#[derive(Debug, Clone, PartialEq)]
pub enum VzPhase {
    Bound(f64),
    Affine { offset: f64, run: Vec<Param> },
}

fn affine_value(offset: f64, run: impl Iterator<Item = f64>) -> f64 {
    let s = run.fold(0.0, |acc, v| acc + v);
    offset + s
}

impl VzPhase {
    pub fn value(&self, slots: &[f64]) -> Result<f64> {
        match self {
            VzPhase::Bound(v) => Ok(*v),
            VzPhase::Affine { offset, run } => {
                let mut err = None;
                let vals = run.iter().map_while(|p| match *p {
                    Param::Bound(a) => Some(a),
                    Param::Slot(s) => slots.get(s).copied().or_else(|| {
                        err = Some(PceError::UnboundSlot(s));
                        None
                    }),
                });
                let v = affine_value(*offset, vals);
                err.map_or(Ok(v), Err)
            }
        }
    }

    pub fn as_bound(&self) -> Option<f64> {
        match self {
            VzPhase::Bound(v) => Some(*v),
            VzPhase::Affine { .. } => None,
        }
    }
}

/// Native operation, generic over what a VZ carries: a [`VzPhase`] in a
/// native circuit, a slot index in a template, an `f64` once executable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NativeOp<P> {
    Vz { qubit: usize, phase: P },
    X90 { qubit: usize },
    Cz { a: usize, b: usize },
    Measure { qubit: usize },
}

impl<P> NativeOp<P> {
    pub fn map_phase<Q>(self, f: impl FnOnce(P) -> Q) -> NativeOp<Q> {
        match self {
            NativeOp::Vz { qubit, phase } => NativeOp::Vz { qubit, phase: f(phase) },
            NativeOp::X90 { qubit } => NativeOp::X90 { qubit },
            NativeOp::Cz { a, b } => NativeOp::Cz { a, b },
            NativeOp::Measure { qubit } => NativeOp::Measure { qubit },
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            NativeOp::Vz { qubit, .. } | NativeOp::X90 { qubit } | NativeOp::Measure { qubit } => {
                (qubit, None)
            }
            NativeOp::Cz { a, b } => (a, Some(b)),
        }
    }
}

impl NativeOp<f64> {
    pub fn text(&self) -> String {
        match *self {
            NativeOp::Vz { qubit, phase } => format!("vz({phase}) q{qubit}"),
            NativeOp::X90 { qubit } => format!("x90 q{qubit}"),
            NativeOp::Cz { a, b } => format!("cz q{a} q{b}"),
            NativeOp::Measure { qubit } => format!("measure q{qubit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NativeCircuit {
    pub n_qubits: usize,
    pub ops: Vec<NativeOp<VzPhase>>,
    pub slots: Vec<SlotInfo>,
}

impl NativeCircuit {
    pub fn is_bound(&self) -> bool {
        self.ops.iter().all(|op| match op {
            NativeOp::Vz { phase, .. } => phase.as_bound().is_some(),
            _ => true,
        })
    }

    pub fn bind(&self, values: &[f64]) -> Result<NativeCircuit> {
        if values.len() != self.slots.len() {
            return Err(PceError::ParameterCount { expected: self.slots.len(), got: values.len() });
        }
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                NativeOp::Vz { qubit, phase } => {
                    Ok(NativeOp::Vz { qubit: *qubit, phase: VzPhase::Bound(phase.value(values)?) })
                }
                NativeOp::X90 { qubit } => Ok(NativeOp::X90 { qubit: *qubit }),
                NativeOp::Cz { a, b } => Ok(NativeOp::Cz { a: *a, b: *b }),
                NativeOp::Measure { qubit } => Ok(NativeOp::Measure { qubit: *qubit }),
            })
            .collect::<Result<_>>()?;
        Ok(NativeCircuit { n_qubits: self.n_qubits, ops, slots: Vec::new() })
    }

    pub fn bind_time(&self, t: f64) -> Result<NativeCircuit> {
        self.bind(&slot_values_at(&self.slots, t)?)
    }

    /// Ops with numeric phases; fails on an unbound slot.
    pub fn bound_ops(&self) -> Result<Vec<NativeOp<f64>>> {
        self.ops
            .iter()
            .map(|op| match op {
                NativeOp::Vz { qubit, phase } => match phase {
                    VzPhase::Bound(v) => Ok(NativeOp::Vz { qubit: *qubit, phase: *v }),
                    VzPhase::Affine { run, .. } => {
                        let slot = run
                            .iter()
                            .find_map(|p| match p {
                                Param::Slot(s) => Some(*s),
                                _ => None,
                            })
                            .unwrap_or(0);
                        Err(PceError::UnboundSlot(slot))
                    }
                },
                NativeOp::X90 { qubit } => Ok(NativeOp::X90 { qubit: *qubit }),
                NativeOp::Cz { a, b } => Ok(NativeOp::Cz { a: *a, b: *b }),
                NativeOp::Measure { qubit } => Ok(NativeOp::Measure { qubit: *qubit }),
            })
            .collect()
    }

    /// Dense unitary of a bound native circuit; measurements are skipped.
    pub fn unitary(&self) -> Result<DMatrix<C64>> {
        let ops = self.bound_ops()?;
        native_unitary(self.n_qubits, &ops)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("native qubits {}\n", self.n_qubits);
        for op in &self.ops {
            let line = match op {
                NativeOp::Vz { qubit, phase: VzPhase::Bound(v) } => format!("vz({v}) q{qubit}"),
                NativeOp::Vz { qubit, phase: VzPhase::Affine { offset, run } } => {
                    let terms: Vec<String> = run
                        .iter()
                        .map(|p| match p {
                            Param::Bound(a) => format!("{a}"),
                            Param::Slot(s) => format!("@{s}"),
                        })
                        .collect();
                    format!("vz({offset}+{}) q{qubit}", terms.join("+"))
                }
                NativeOp::X90 { qubit } => format!("x90 q{qubit}"),
                NativeOp::Cz { a, b } => format!("cz q{a} q{b}"),
                NativeOp::Measure { qubit } => format!("measure q{qubit}"),
            };
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

pub fn native_unitary(n_qubits: usize, ops: &[NativeOp<f64>]) -> Result<DMatrix<C64>> {
    let dim = linalg::check_dense(n_qubits)?;
    let x90 = linalg::rx(FRAC_PI_2);
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for mut col in u.column_iter_mut() {
        let mut state: Vec<C64> = col.iter().copied().collect();
        for op in ops {
            match *op {
                NativeOp::Vz { qubit, phase } => linalg::apply_single(&mut state, qubit, &linalg::rz(phase)),
                NativeOp::X90 { qubit } => linalg::apply_single(&mut state, qubit, &x90),
                NativeOp::Cz { a, b } => linalg::apply_cz(&mut state, a, b),
                NativeOp::Measure { .. } => {}
            }
        }
        for (dst, src) in col.iter_mut().zip(state) {
            *dst = src;
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Fixed(Mat2),
    Phase(Param),
}

/// `Z_u X90 Z_c` factors of `m` (time order: `Z_c` first), if `|m00| = 1/√2`.
fn half_turn_factors(m: &Mat2) -> Option<(f64, f64)> {
    let c = FRAC_PI_2 - (m[0][0] * m[0][1].conj()).arg();
    let u = (m[1][1] * m[0][0].conj()).arg() - c;
    let rebuilt = linalg::mul2(&linalg::rz(u), &linalg::mul2(&linalg::rx(FRAC_PI_2), &linalg::rz(c)));
    (linalg::phase_distance2(m, &rebuilt) < PATTERN_TOL).then_some((u, c))
}

fn diagonal_phase(m: &Mat2) -> Option<f64> {
    (m[0][1].norm() < PATTERN_TOL && m[1][0].norm() < PATTERN_TOL)
        .then(|| (m[1][1] * m[0][0].conj()).arg())
}

fn product(pieces: &[Piece]) -> Mat2 {
    pieces.iter().fold(linalg::identity2(), |acc, p| match p {
        Piece::Fixed(m) => linalg::mul2(m, &acc),
        Piece::Phase(Param::Bound(a)) => linalg::mul2(&linalg::rz(*a), &acc),
        Piece::Phase(Param::Slot(_)) => unreachable!("slots are never multiplied numerically"),
    })
}

fn block_phases(u: &Mat2) -> Result<[f64; 3]> {
    let (phi, theta, lam) = zxzxz(u)?;
    Ok([lam - FRAC_PI_2, PI - theta, phi - FRAC_PI_2])
}

/// Keeps the RZ run as an additive term of one of the three phases.
fn phase_run_block(before: &Mat2, run: &[Param], after: &Mat2) -> Result<Option<[VzPhase; 3]>> {
    let make = |offset: f64| {
        if run.iter().all(|p| matches!(p, Param::Bound(_))) {
            let vals = run.iter().map(|p| match p {
                Param::Bound(a) => *a,
                Param::Slot(_) => unreachable!(),
            });
            VzPhase::Bound(affine_value(offset, vals))
        } else {
            VzPhase::Affine { offset, run: run.to_vec() }
        }
    };
    if let Some(p) = diagonal_phase(before) {
        let [first, mid, last] = block_phases(after)?;
        return Ok(Some([make(first + p), VzPhase::Bound(mid), VzPhase::Bound(last)]));
    }
    if let Some(q) = diagonal_phase(after) {
        let [first, mid, last] = block_phases(before)?;
        return Ok(Some([VzPhase::Bound(first), VzPhase::Bound(mid), make(last + q)]));
    }
    if let (Some((u, c)), Some((a, w))) = (half_turn_factors(before), half_turn_factors(after)) {
        return Ok(Some([VzPhase::Bound(c), make(w + u), VzPhase::Bound(a)]));
    }
    Ok(None)
}

fn flush(qubit: usize, pieces: &mut Vec<Piece>, ops: &mut Vec<NativeOp<VzPhase>>) -> Result<()> {
    if pieces.is_empty() {
        return Ok(());
    }
    let phase_idx: Vec<usize> =
        pieces.iter().enumerate().filter(|(_, p)| matches!(p, Piece::Phase(_))).map(|(i, _)| i).collect();
    let contiguous = phase_idx.windows(2).all(|w| w[1] == w[0] + 1);

    let mut phases = None;
    if let (Some(&start), Some(&end), true) = (phase_idx.first(), phase_idx.last(), contiguous) {
        let before = product(&pieces[..start]);
        let after = product(&pieces[end + 1..]);
        let run: Vec<Param> = pieces[start..=end]
            .iter()
            .map(|p| match p {
                Piece::Phase(param) => *param,
                Piece::Fixed(_) => unreachable!(),
            })
            .collect();
        phases = phase_run_block(&before, &run, &after)?;
    }
    let phases = match phases {
        Some(p) => p,
        None => {
            if let Some(s) = pieces.iter().find_map(|p| match p {
                Piece::Phase(Param::Slot(s)) => Some(*s),
                _ => None,
            }) {
                return Err(PceError::Structural { slot: s, qubit });
            }
            block_phases(&product(pieces))?.map(VzPhase::Bound)
        }
    };
    let [first, mid, last] = phases;
    ops.push(NativeOp::Vz { qubit, phase: first });
    ops.push(NativeOp::X90 { qubit });
    ops.push(NativeOp::Vz { qubit, phase: mid });
    ops.push(NativeOp::X90 { qubit });
    ops.push(NativeOp::Vz { qubit, phase: last });
    pieces.clear();
    Ok(())
}

/// Lowers a gate circuit to the native set.
///
/// `CX(a,b)` becomes `H(b) CZ(a,b) H(b)` and `CY(a,b)` becomes
/// `RZ(-π/2)(b) CX(a,b) RZ(π/2)(b)`. Slots may only sit on RZ gates.
pub fn to_native(c: &Circuit) -> Result<NativeCircuit> {
    let n = c.n_qubits();
    let mut pending: Vec<Vec<Piece>> = vec![Vec::new(); n];
    let mut ops = Vec::with_capacity(c.gates().len() * 3);
    let h = linalg::hadamard();

    let entangle = |a: usize,
                        b: usize,
                        pre: &[Piece],
                        post: &[Piece],
                        pending: &mut Vec<Vec<Piece>>,
                        ops: &mut Vec<NativeOp<VzPhase>>|
     -> Result<()> {
        pending[b].extend_from_slice(pre);
        flush(a, &mut pending[a], ops)?;
        flush(b, &mut pending[b], ops)?;
        ops.push(NativeOp::Cz { a, b });
        pending[b].extend_from_slice(post);
        Ok(())
    };

    for gate in c.gates() {
        match *gate {
            Gate::Rz(q, p) => pending[q].push(Piece::Phase(p)),
            Gate::Rx(q, Param::Slot(s)) | Gate::Ry(q, Param::Slot(s)) => {
                return Err(PceError::Structural { slot: s, qubit: q })
            }
            Gate::H(q) | Gate::X90(q) | Gate::Rx(q, _) | Gate::Ry(q, _) => {
                pending[q].push(Piece::Fixed(gate.matrix().expect("bound one-qubit gate")))
            }
            Gate::Cz(a, b) => entangle(a, b, &[], &[], &mut pending, &mut ops)?,
            Gate::Cx(a, b) => entangle(a, b, &[Piece::Fixed(h)], &[Piece::Fixed(h)], &mut pending, &mut ops)?,
            Gate::Cy(a, b) => entangle(
                a,
                b,
                &[Piece::Phase(Param::Bound(-FRAC_PI_2)), Piece::Fixed(h)],
                &[Piece::Fixed(h), Piece::Phase(Param::Bound(FRAC_PI_2))],
                &mut pending,
                &mut ops,
            )?,
            Gate::Measure(q) => {
                flush(q, &mut pending[q], &mut ops)?;
                ops.push(NativeOp::Measure { qubit: q });
            }
        }
    }
    for (q, pieces) in pending.iter_mut().enumerate() {
        flush(q, pieces, &mut ops)?;
    }
    Ok(NativeCircuit { n_qubits: n, ops, slots: c.slots().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::pauli_gadget;

    fn phase_eq(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        let ov = b.adjoint() * a;
        let tr = ov.trace();
        let ph = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
        (a - b * ph).norm()
    }

    #[test]
    fn rz_has_zero_theta() {
        for alpha in [0.3, -2.0, 3.1] {
            let (phi, theta, lam) = zxzxz(&linalg::rz(alpha)).unwrap();
            assert!(theta.abs() < 1e-12);
            assert!(wrap_angle(phi + lam - alpha).abs() < 1e-12);
            assert!(linalg::phase_distance2(&zxzxz_matrix(phi, theta, lam), &linalg::rz(alpha)) < 1e-12);
        }
    }

    #[test]
    fn identity_and_pi_rotation() {
        for u in [linalg::identity2(), linalg::pauli_x(), linalg::pauli_y(), linalg::hadamard()] {
            let (phi, theta, lam) = zxzxz(&u).unwrap();
            assert!(linalg::phase_distance2(&zxzxz_matrix(phi, theta, lam), &u) < 1e-12);
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let mut m = linalg::identity2();
        m[0][0] = C64::new(2.0, 0.0);
        assert!(matches!(zxzxz(&m), Err(PceError::NotUnitary(_))));
    }

    #[test]
    fn cx_lowering() {
        let mut c = Circuit::new(2);
        c.push(Gate::Cx(0, 1)).unwrap();
        let n = to_native(&c).unwrap();
        let kinds: Vec<_> = n.ops.iter().map(std::mem::discriminant).collect();
        assert_eq!(kinds.len(), 11);
        assert!(phase_eq(&n.unitary().unwrap(), &c.unitary().unwrap()) < 1e-10);
    }

    #[test]
    fn cy_lowering() {
        let mut c = Circuit::new(2);
        c.push(Gate::H(1)).unwrap();
        c.push(Gate::Cy(1, 0)).unwrap();
        let n = to_native(&c).unwrap();
        assert!(phase_eq(&n.unitary().unwrap(), &c.unitary().unwrap()) < 1e-10);
    }

    #[test]
    fn slot_rz_stays_symbolic() {
        let mut c = Circuit::new(1);
        let s = c.add_slot("s", Some(1.0));
        c.push(Gate::Rz(0, Param::Slot(s))).unwrap();
        let n = to_native(&c).unwrap();
        assert_eq!(n.ops.len(), 5);
        assert!(!n.is_bound());
        assert!(matches!(n.ops[0], NativeOp::Vz { phase: VzPhase::Affine { .. }, .. }));
        let bound = n.bind(&[0.8]).unwrap();
        let direct = to_native(&c.bind(&[0.8]).unwrap()).unwrap();
        assert_eq!(bound, direct);
    }

    #[test]
    fn sandwiched_slot_lands_in_middle_phase() {
        let g = pauli_gadget(&"XX".parse().unwrap(), Param::Slot(0)).unwrap();
        let n = to_native(&g).unwrap();
        for t in [0.1, 1.7] {
            assert_eq!(n.bind(&[t]).unwrap(), to_native(&g.bind(&[t]).unwrap()).unwrap());
            let u = n.bind(&[t]).unwrap().unitary().unwrap();
            assert!(phase_eq(&u, &g.bind(&[t]).unwrap().unitary().unwrap()) < 1e-10);
        }
    }

    #[test]
    fn slot_on_rx_is_structural_error() {
        let mut c = Circuit::new(1);
        let s = c.add_slot("s", None);
        c.push(Gate::Rx(0, Param::Slot(s))).unwrap();
        assert!(matches!(to_native(&c), Err(PceError::Structural { slot: 0, qubit: 0 })));
    }

    #[test]
    fn empty_circuit() {
        let n = to_native(&Circuit::new(3)).unwrap();
        assert!(n.ops.is_empty());
    }
}
