//! Gate-level circuits: Pauli gadgets, KHK time evolution and the Hadamard test.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cartan::CartanDecomposition;
use crate::error::{PceError, Result};
use crate::linalg::{self, Mat2, C64};
use crate::pauli::{Pauli, PauliString};

pub type SlotId = usize;

/// Rotation angle: either a number or a reference to a circuit slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Bound(f64),
    Slot(SlotId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X90(usize),
    Rx(usize, Param),
    Ry(usize, Param),
    Rz(usize, Param),
    Cx(usize, usize),
    Cy(usize, usize),
    Cz(usize, usize),
    Measure(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X90,
    Rx,
    Ry,
    Rz,
    Cx,
    Cy,
    Cz,
    Measure,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::X90(_) => GateKind::X90,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Cx(..) => GateKind::Cx,
            Gate::Cy(..) => GateKind::Cy,
            Gate::Cz(..) => GateKind::Cz,
            Gate::Measure(_) => GateKind::Measure,
        }
    }

    /// Operand qubits; the second entry is `None` for one-qubit gates.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::X90(q) | Gate::Measure(q) => (q, None),
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cx(a, b) | Gate::Cy(a, b) | Gate::Cz(a, b) => (a, Some(b)),
        }
    }

    pub fn param(&self) -> Option<Param> {
        match *self {
            Gate::Rx(_, p) | Gate::Ry(_, p) | Gate::Rz(_, p) => Some(p),
            _ => None,
        }
    }

    fn with_param(self, p: Param) -> Gate {
        match self {
            Gate::Rx(q, _) => Gate::Rx(q, p),
            Gate::Ry(q, _) => Gate::Ry(q, p),
            Gate::Rz(q, _) => Gate::Rz(q, p),
            g => g,
        }
    }

    fn shifted(self, by: usize, slot_base: usize) -> Gate {
        let remap = |p: Param| match p {
            Param::Slot(s) => Param::Slot(s + slot_base),
            b => b,
        };
        match self {
            Gate::H(q) => Gate::H(q + by),
            Gate::X90(q) => Gate::X90(q + by),
            Gate::Rx(q, p) => Gate::Rx(q + by, remap(p)),
            Gate::Ry(q, p) => Gate::Ry(q + by, remap(p)),
            Gate::Rz(q, p) => Gate::Rz(q + by, remap(p)),
            Gate::Cx(a, b) => Gate::Cx(a + by, b + by),
            Gate::Cy(a, b) => Gate::Cy(a + by, b + by),
            Gate::Cz(a, b) => Gate::Cz(a + by, b + by),
            Gate::Measure(q) => Gate::Measure(q + by),
        }
    }

    /// Single-qubit matrix for a bound one-qubit gate.
    pub fn matrix(&self) -> Option<Mat2> {
        let bound = |p: Param| match p {
            Param::Bound(a) => Some(a),
            Param::Slot(_) => None,
        };
        match *self {
            Gate::H(_) => Some(linalg::hadamard()),
            Gate::X90(_) => Some(linalg::rx(FRAC_PI_2)),
            Gate::Rx(_, p) => bound(p).map(linalg::rx),
            Gate::Ry(_, p) => bound(p).map(linalg::ry),
            Gate::Rz(_, p) => bound(p).map(linalg::rz),
            _ => None,
        }
    }
}

/// Human-readable description of a slot. `time_scale`, when present, means the
/// slot's value is `time_scale * t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInfo {
    pub tag: String,
    pub time_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    slots: Vec<SlotInfo>,
}

/// Time argument for [`build_time_evolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Time {
    At(f64),
    Symbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Real,
    Imag,
}

/// Angle of the h-gadget for coefficient `a` at time `t`.
#[inline]
pub fn h_angle(a: f64, t: f64) -> f64 {
    (2.0 * a) * t
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), slots: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn slots(&self) -> &[SlotInfo] {
        &self.slots
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn add_slot(&mut self, tag: impl Into<String>, time_scale: Option<f64>) -> SlotId {
        self.slots.push(SlotInfo { tag: tag.into(), time_scale });
        self.slots.len() - 1
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let (a, b) = gate.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= self.n_qubits {
                return Err(PceError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
        }
        if b == Some(a) {
            return Err(PceError::Config(format!("two-qubit gate on a single qubit {a}")));
        }
        if let Some(Param::Slot(s)) = gate.param() {
            if s >= self.slots.len() {
                return Err(PceError::UnboundSlot(s));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `other` with its qubits shifted by `offset`; slots are renumbered.
    pub fn append_shifted(&mut self, other: &Circuit, offset: usize) -> Result<()> {
        if other.n_qubits + offset > self.n_qubits {
            return Err(PceError::QubitOutOfRange {
                qubit: other.n_qubits + offset - 1,
                n_qubits: self.n_qubits,
            });
        }
        let base = self.slots.len();
        self.slots.extend(other.slots.iter().cloned());
        self.gates.extend(other.gates.iter().map(|g| g.shifted(offset, base)));
        Ok(())
    }

    pub fn is_bound(&self) -> bool {
        self.gates.iter().all(|g| !matches!(g.param(), Some(Param::Slot(_))))
    }

    /// Substitutes slot values; the result has no slots.
    pub fn bind(&self, values: &[f64]) -> Result<Circuit> {
        if values.len() != self.slots.len() {
            return Err(PceError::ParameterCount { expected: self.slots.len(), got: values.len() });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| match g.param() {
                Some(Param::Slot(s)) => g.with_param(Param::Bound(values[s])),
                _ => *g,
            })
            .collect();
        Ok(Circuit { n_qubits: self.n_qubits, gates, slots: Vec::new() })
    }

    /// Binds every time-scaling slot at `t`.
    pub fn bind_time(&self, t: f64) -> Result<Circuit> {
        self.bind(&slot_values_at(&self.slots, t)?)
    }

    /// Same gate kinds and operands, ignoring angle values.
    pub fn same_structure(&self, other: &Circuit) -> bool {
        self.n_qubits == other.n_qubits
            && self.gates.len() == other.gates.len()
            && self
                .gates
                .iter()
                .zip(&other.gates)
                .all(|(a, b)| a.kind() == b.kind() && a.qubits() == b.qubits())
    }

    /// Dense unitary of a bound circuit; measurements are skipped.
    pub fn unitary(&self) -> Result<DMatrix<C64>> {
        let dim = linalg::check_dense(self.n_qubits)?;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for mut col in u.column_iter_mut() {
            let mut state: Vec<C64> = col.iter().copied().collect();
            for g in &self.gates {
                apply_gate(&mut state, g)?;
            }
            for (dst, src) in col.iter_mut().zip(state) {
                *dst = src;
            }
        }
        Ok(u)
    }

    /// One gate per line, for debugging and golden files.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for (i, s) in self.slots.iter().enumerate() {
            match s.time_scale {
                Some(k) => writeln!(out, "slot {i} {:?} t*{k}", s.tag).unwrap(),
                None => writeln!(out, "slot {i} {:?}", s.tag).unwrap(),
            }
        }
        let fmt_param = |p: Param| match p {
            Param::Bound(a) => format!("{a}"),
            Param::Slot(s) => format!("@{s}"),
        };
        for g in &self.gates {
            let line = match *g {
                Gate::H(q) => format!("h q{q}"),
                Gate::X90(q) => format!("x90 q{q}"),
                Gate::Rx(q, p) => format!("rx({}) q{q}", fmt_param(p)),
                Gate::Ry(q, p) => format!("ry({}) q{q}", fmt_param(p)),
                Gate::Rz(q, p) => format!("rz({}) q{q}", fmt_param(p)),
                Gate::Cx(a, b) => format!("cx q{a} q{b}"),
                Gate::Cy(a, b) => format!("cy q{a} q{b}"),
                Gate::Cz(a, b) => format!("cz q{a} q{b}"),
                Gate::Measure(q) => format!("measure q{q}"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

pub(crate) fn slot_values_at(slots: &[SlotInfo], t: f64) -> Result<Vec<f64>> {
    slots
        .iter()
        .enumerate()
        .map(|(i, s)| s.time_scale.map(|k| k * t).ok_or(PceError::UnboundSlot(i)))
        .collect()
}

fn apply_gate(state: &mut [C64], g: &Gate) -> Result<()> {
    match *g {
        Gate::Cx(a, b) => linalg::apply_controlled(state, a, b, &linalg::pauli_x()),
        Gate::Cy(a, b) => linalg::apply_controlled(state, a, b, &linalg::pauli_y()),
        Gate::Cz(a, b) => linalg::apply_cz(state, a, b),
        Gate::Measure(_) => {}
        _ => {
            let m = match g.matrix() {
                Some(m) => m,
                None => match g.param() {
                    Some(Param::Slot(s)) => return Err(PceError::UnboundSlot(s)),
                    _ => unreachable!("one-qubit gates always have a matrix when bound"),
                },
            };
            linalg::apply_single(state, g.qubits().0, &m);
        }
    }
    Ok(())
}

/// Appends `exp(-i angle/2 P)` acting on qubits `offset + site`.
///
/// X sites are rotated with H and Y sites with RX(π/2) / RX(-π/2) so that the
/// string becomes a Z string; a CX ladder collects parity on the highest
/// active qubit, which carries the RZ.
fn push_gadget(c: &mut Circuit, p: &PauliString, angle: Param, offset: usize) -> Result<()> {
    let support: Vec<(usize, Pauli)> = p.support().collect();
    let Some(&(last, _)) = support.last() else {
        return Err(PceError::IdentityGadget);
    };
    for &(q, letter) in &support {
        match letter {
            Pauli::X => c.push(Gate::H(q + offset))?,
            Pauli::Y => c.push(Gate::Rx(q + offset, Param::Bound(FRAC_PI_2)))?,
            _ => {}
        }
    }
    for w in support.windows(2) {
        c.push(Gate::Cx(w[0].0 + offset, w[1].0 + offset))?;
    }
    c.push(Gate::Rz(last + offset, angle))?;
    for w in support.windows(2).rev() {
        c.push(Gate::Cx(w[0].0 + offset, w[1].0 + offset))?;
    }
    for &(q, letter) in &support {
        match letter {
            Pauli::X => c.push(Gate::H(q + offset))?,
            Pauli::Y => c.push(Gate::Rx(q + offset, Param::Bound(-FRAC_PI_2)))?,
            _ => {}
        }
    }
    Ok(())
}

/// Circuit for `exp(-i angle/2 p)`. A slot angle becomes slot 0 of the result.
pub fn pauli_gadget(p: &PauliString, angle: Param) -> Result<Circuit> {
    let mut c = Circuit::new(p.n_qubits());
    let angle = match angle {
        Param::Slot(_) => Param::Slot(c.add_slot("gadget angle", None)),
        b => b,
    };
    push_gadget(&mut c, p, angle, 0)?;
    Ok(c)
}

/// `K exp(-i Σ a_j h_j t) K†` with `K = Π_j exp(i b_j k_j)`.
///
/// In time order: `K†` (factors in order, gadget angles `2 b_j`), the h
/// gadgets (angles `2 a_j t`), then `K` (factors reversed, angles `-2 b_j`).
/// Only the h angles depend on `t`; with [`Time::Symbolic`] each is a slot
/// whose value is `2 a_j · t`.
pub fn build_time_evolution(d: &CartanDecomposition, t: Time) -> Result<Circuit> {
    let mut c = Circuit::new(d.n_qubits);
    for f in &d.k_factors {
        push_gadget(&mut c, &f.pauli, Param::Bound(2.0 * f.angle), 0)?;
    }
    for (j, h) in d.h_terms.iter().enumerate() {
        let angle = match t {
            Time::At(t) => Param::Bound(h_angle(h.coefficient, t)),
            Time::Symbolic => Param::Slot(c.add_slot(
                format!("h-angle {j} ({}), scales with t", h.pauli),
                Some(2.0 * h.coefficient),
            )),
        };
        push_gadget(&mut c, &h.pauli, angle, 0)?;
    }
    for f in d.k_factors.iter().rev() {
        push_gadget(&mut c, &f.pauli, Param::Bound(-2.0 * f.angle), 0)?;
    }
    Ok(c)
}

fn system_string(p: &PauliString, n_system: usize) -> Result<Vec<(usize, Pauli)>> {
    if p.n_qubits() == n_system {
        Ok(p.support().map(|(q, l)| (q + 1, l)).collect())
    } else if p.n_qubits() == n_system + 1 {
        if p.letter(0) != Pauli::I {
            return Err(PceError::AncillaOverlap);
        }
        Ok(p.support().collect())
    } else {
        Err(PceError::QubitMismatch { left: n_system, right: p.n_qubits() })
    }
}

fn push_controlled(c: &mut Circuit, sites: &[(usize, Pauli)]) -> Result<()> {
    for &(q, letter) in sites {
        match letter {
            Pauli::X => c.push(Gate::Cx(0, q))?,
            Pauli::Y => c.push(Gate::Cy(0, q))?,
            Pauli::Z => c.push(Gate::Cz(0, q))?,
            Pauli::I => {}
        }
    }
    Ok(())
}

/// Hadamard test for `<Φ| U† B U A |Φ>` with the ancilla on qubit 0.
///
/// `a` and `b` are given on the system register (qubits `1..=N` of the
/// result) or on the full register with identity on the ancilla. The
/// ancilla `<Z>` equals Re C(t) for [`Basis::Real`] and Im C(t) for
/// [`Basis::Imag`].
pub fn build_hadamard_test(
    a: &PauliString,
    b: &PauliString,
    evolution: &Circuit,
    basis: Basis,
) -> Result<Circuit> {
    let n = evolution.n_qubits();
    let a_sites = system_string(a, n)?;
    let b_sites = system_string(b, n)?;
    let mut c = Circuit::new(n + 1);
    c.push(Gate::H(0))?;
    push_controlled(&mut c, &a_sites)?;
    c.append_shifted(evolution, 1)?;
    push_controlled(&mut c, &b_sites)?;
    match basis {
        Basis::Real => c.push(Gate::H(0))?,
        Basis::Imag => c.push(Gate::Rx(0, Param::Bound(FRAC_PI_2)))?,
    }
    c.push(Gate::Measure(0))?;
    Ok(c)
}
