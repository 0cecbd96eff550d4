//! Read-Identify-Peel: group structurally equivalent native circuits, extract
//! their VZ phases into a parameter table, and binarize the result.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use xxhash_rust::xxh3::xxh3_128;

use crate::circuit::{slot_values_at, SlotInfo};
use crate::error::{PceError, Result};
use crate::transpile::{NativeCircuit, NativeOp, VzPhase};

pub const MAGIC: &[u8; 4] = b"PCE1";
pub const FORMAT_VERSION: u16 = 1;

const OP_VZ: u8 = 0;
const OP_X90: u8 = 1;
const OP_CZ: u8 = 2;
const OP_MEASURE: u8 = 3;
const NO_QUBIT: u8 = 0xFF;

/// 128-bit digest of a circuit's structure (phase values excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateKey(pub u128);

impl fmt::Display for TemplateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Native ops whose VZ phases are slot indices `0..n_slots` in encounter order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircuitTemplate {
    pub n_qubits: usize,
    pub ops: Vec<NativeOp<u32>>,
    pub n_slots: usize,
}

impl CircuitTemplate {
    pub fn key(&self) -> TemplateKey {
        let mut bytes = Vec::with_capacity(2 + 3 * self.ops.len());
        bytes.extend_from_slice(&(self.n_qubits as u16).to_le_bytes());
        for op in &self.ops {
            let (code, q0, q1) = op_code(op);
            bytes.extend_from_slice(&[code, q0 as u8, q1.map_or(NO_QUBIT, |q| q as u8)]);
        }
        TemplateKey(xxh3_128(&bytes))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("template qubits {} slots {}\n", self.n_qubits, self.n_slots);
        for op in &self.ops {
            let line = match *op {
                NativeOp::Vz { qubit, phase } => format!("vz(@{phase}) q{qubit}"),
                NativeOp::X90 { qubit } => format!("x90 q{qubit}"),
                NativeOp::Cz { a, b } => format!("cz q{a} q{b}"),
                NativeOp::Measure { qubit } => format!("measure q{qubit}"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

fn op_code<P>(op: &NativeOp<P>) -> (u8, usize, Option<usize>) {
    match *op {
        NativeOp::Vz { qubit, .. } => (OP_VZ, qubit, None),
        NativeOp::X90 { qubit } => (OP_X90, qubit, None),
        NativeOp::Cz { a, b } => (OP_CZ, a, Some(b)),
        NativeOp::Measure { qubit } => (OP_MEASURE, qubit, None),
    }
}

/// One row of phases per circuit, stored row-major; `circuit_ids` are
/// positions in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTable {
    pub n_slots: usize,
    pub circuit_ids: Vec<usize>,
    values: Vec<f64>,
}

impl ParameterTable {
    pub fn new(n_slots: usize) -> Self {
        Self { n_slots, circuit_ids: Vec::new(), values: Vec::new() }
    }

    pub fn with_capacity(n_slots: usize, rows: usize) -> Self {
        Self { n_slots, circuit_ids: Vec::with_capacity(rows), values: Vec::with_capacity(rows * n_slots) }
    }

    pub fn len(&self) -> usize {
        self.circuit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuit_ids.is_empty()
    }

    pub fn push(&mut self, circuit_id: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.n_slots {
            return Err(PceError::ParameterCount { expected: self.n_slots, got: row.len() });
        }
        self.circuit_ids.push(circuit_id);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn row(&self, index: usize) -> Option<&[f64]> {
        (index < self.len()).then(|| &self.values[index * self.n_slots..(index + 1) * self.n_slots])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(|i| &self.values[i * self.n_slots..(i + 1) * self.n_slots])
    }

    /// All rows back to back.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Splits bound native ops into a template and the phase row.
pub fn peel_ops(n_qubits: usize, ops: &[NativeOp<f64>]) -> (CircuitTemplate, Vec<f64>) {
    let mut row = Vec::new();
    let template_ops = ops
        .iter()
        .map(|op| {
            op.map_phase(|v| {
                row.push(v);
                (row.len() - 1) as u32
            })
        })
        .collect();
    let template = CircuitTemplate { n_qubits, ops: template_ops, n_slots: row.len() };
    (template, row)
}

pub fn peel(c: &NativeCircuit) -> Result<(CircuitTemplate, Vec<f64>)> {
    let ops = c.bound_ops()?;
    Ok(peel_ops(c.n_qubits, &ops))
}

/// Template of a symbolic native circuit together with the rule that turns
/// slot values into its parameter row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicTemplate {
    pub template: CircuitTemplate,
    pub slots: Vec<SlotInfo>,
    constants: Vec<f64>,
    constant_bytes: Vec<u8>,
    varying: Vec<(usize, VzPhase)>,
}

impl SymbolicTemplate {
    /// Row for the given slot values; identical, bit for bit, to peeling the
    /// circuit bound with the same values.
    pub fn row(&self, slot_values: &[f64]) -> Result<Vec<f64>> {
        if slot_values.len() != self.slots.len() {
            return Err(PceError::ParameterCount { expected: self.slots.len(), got: slot_values.len() });
        }
        let mut row = self.constants.clone();
        for (i, phase) in &self.varying {
            row[*i] = phase.value(slot_values)?;
        }
        Ok(row)
    }

    pub fn row_at(&self, t: f64) -> Result<Vec<f64>> {
        self.row(&slot_values_at(&self.slots, t)?)
    }

    /// Appends the row for time `t` to `table` without an intermediate row.
    pub fn push_row_at(&self, table: &mut ParameterTable, circuit_id: usize, t: f64) -> Result<()> {
        if table.n_slots != self.template.n_slots {
            return Err(PceError::ParameterCount { expected: self.template.n_slots, got: table.n_slots });
        }
        let slot_values = slot_values_at(&self.slots, t)?;
        let start = table.values.len();
        table.values.extend_from_slice(&self.constants);
        for (i, phase) in &self.varying {
            match phase.value(&slot_values) {
                Ok(v) => table.values[start + i] = v,
                Err(e) => {
                    table.values.truncate(start);
                    return Err(e);
                }
            }
        }
        table.circuit_ids.push(circuit_id);
        Ok(())
    }

    /// Writes the row for time `t` straight into a payload.
    pub fn write_row_at(&self, w: &mut PayloadWriter, t: f64) -> Result<()> {
        if w.n_slots != self.template.n_slots {
            return Err(PceError::ParameterCount { expected: self.template.n_slots, got: w.n_slots });
        }
        let slot_values = slot_values_at(&self.slots, t)?;
        let start = w.bytes.len();
        w.bytes.extend_from_slice(&self.constant_bytes);
        for (i, phase) in &self.varying {
            match phase.value(&slot_values) {
                Ok(v) => w.bytes[start + 8 * i..start + 8 * i + 8].copy_from_slice(&v.to_le_bytes()),
                Err(e) => {
                    w.bytes.truncate(start);
                    return Err(e);
                }
            }
        }
        w.n_rows += 1;
        Ok(())
    }

    /// Number of row entries that depend on the slots.
    pub fn varying_len(&self) -> usize {
        self.varying.len()
    }
}

/// Peels a native circuit whose VZ phases may still reference slots.
pub fn peel_symbolic(c: &NativeCircuit) -> SymbolicTemplate {
    let mut constants = Vec::new();
    let mut varying = Vec::new();
    let ops = c
        .ops
        .iter()
        .map(|op| {
            op.clone().map_phase(|phase| {
                let i = constants.len();
                match phase {
                    VzPhase::Bound(v) => constants.push(v),
                    affine => {
                        constants.push(0.0);
                        varying.push((i, affine));
                    }
                }
                i as u32
            })
        })
        .collect();
    let template = CircuitTemplate { n_qubits: c.n_qubits, ops, n_slots: constants.len() };
    let constant_bytes = constants.iter().flat_map(|v| v.to_le_bytes()).collect();
    SymbolicTemplate { template, slots: c.slots.clone(), constants, constant_bytes, varying }
}

/// An equivalence class found by [`identify`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateClass {
    pub key: TemplateKey,
    pub template: CircuitTemplate,
    pub table: ParameterTable,
}

/// Groups a batch into structural classes, in order of first appearance.
/// Rows keep batch order within each class.
pub fn identify(batch: &[NativeCircuit]) -> Result<Vec<TemplateClass>> {
    let peeled: Vec<(TemplateKey, CircuitTemplate, Vec<f64>)> = batch
        .par_iter()
        .map(|c| {
            let (t, row) = peel(c)?;
            Ok((t.key(), t, row))
        })
        .collect::<Result<_>>()?;

    let mut classes: Vec<TemplateClass> = Vec::new();
    let mut by_key: HashMap<TemplateKey, Vec<usize>> = HashMap::new();
    for (id, (key, template, row)) in peeled.into_iter().enumerate() {
        let candidates = by_key.entry(key).or_default();
        let found = candidates.iter().copied().find(|&ci| classes[ci].template == template);
        let ci = match found {
            Some(ci) => ci,
            None => {
                classes.push(TemplateClass {
                    key,
                    table: ParameterTable::new(template.n_slots),
                    template,
                });
                candidates.push(classes.len() - 1);
                classes.len() - 1
            }
        };
        classes[ci].table.push(id, &row)?;
    }
    Ok(classes)
}

/// Incremental encoder: template first, then rows one at a time.
pub struct PayloadWriter {
    bytes: Vec<u8>,
    n_slots: usize,
    count_at: usize,
    n_rows: usize,
}

fn narrow(v: usize, what: &str, max: usize) -> Result<usize> {
    if v > max {
        Err(PceError::Payload(format!("{what} {v} exceeds the format limit {max}")))
    } else {
        Ok(v)
    }
}

impl PayloadWriter {
    /// `rows_hint` only sizes the buffer.
    pub fn new(template: &CircuitTemplate, rows_hint: usize) -> Result<Self> {
        Self::with_buffer(template, rows_hint, Vec::new())
    }

    /// Like [`PayloadWriter::new`], but writes into `buf`, keeping its capacity.
    pub fn with_buffer(template: &CircuitTemplate, rows_hint: usize, mut buf: Vec<u8>) -> Result<Self> {
        narrow(template.n_qubits, "qubit count", u16::MAX as usize)?;
        buf.clear();
        buf.reserve(20 + 7 * template.ops.len() + 8 * template.n_slots * rows_hint);
        let mut out = buf;
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(template.n_qubits as u16).to_le_bytes());
        out.extend_from_slice(&(narrow(template.ops.len(), "op count", u32::MAX as usize)? as u32).to_le_bytes());
        for op in &template.ops {
            let (code, q0, q1) = op_code(op);
            let q1 = match q1 {
                Some(q) => narrow(q, "qubit", 0xFE)? as u8,
                None => NO_QUBIT,
            };
            out.extend_from_slice(&[code, narrow(q0, "qubit", 0xFE)? as u8, q1]);
            let slot = match *op {
                NativeOp::Vz { phase, .. } => narrow(phase as usize, "slot", i32::MAX as usize)? as i32,
                _ => -1,
            };
            out.extend_from_slice(&slot.to_le_bytes());
        }
        out.extend_from_slice(&(narrow(template.n_slots, "slot count", u32::MAX as usize)? as u32).to_le_bytes());
        let count_at = out.len();
        out.extend_from_slice(&0u32.to_le_bytes());
        Ok(Self { bytes: out, n_slots: template.n_slots, count_at, n_rows: 0 })
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_slots {
            return Err(PceError::ParameterCount { expected: self.n_slots, got: row.len() });
        }
        let start = self.bytes.len();
        self.bytes.resize(start + 8 * row.len(), 0);
        for (dst, v) in self.bytes[start..].chunks_exact_mut(8).zip(row) {
            dst.copy_from_slice(&v.to_le_bytes());
        }
        self.n_rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn finish(mut self) -> Result<Vec<u8>> {
        let n = narrow(self.n_rows, "circuit count", u32::MAX as usize)? as u32;
        self.bytes[self.count_at..self.count_at + 4].copy_from_slice(&n.to_le_bytes());
        Ok(self.bytes)
    }
}

pub fn serialize(template: &CircuitTemplate, table: &ParameterTable) -> Result<Vec<u8>> {
    serialize_into(template, table, Vec::new())
}

/// [`serialize`] into a recycled buffer.
pub fn serialize_into(template: &CircuitTemplate, table: &ParameterTable, buf: Vec<u8>) -> Result<Vec<u8>> {
    if table.n_slots != template.n_slots || table.values.len() != table.len() * table.n_slots {
        return Err(PceError::Payload("parameter rows do not match the template".into()));
    }
    let mut w = PayloadWriter::with_buffer(template, table.len(), buf)?;
    for row in table.rows() {
        w.push_row(row)?;
    }
    w.finish()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            PceError::Payload(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }
}

/// Inverse of [`serialize`]. Circuit ids come back as `0..n_circuits`.
pub fn deserialize(bytes: &[u8]) -> Result<(CircuitTemplate, ParameterTable)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(PceError::Payload("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(PceError::Payload(format!("unsupported version {version}")));
    }
    let n_qubits = r.u16("qubit count")? as usize;
    let n_ops = r.u32("op count")? as usize;
    let qubit = |q: u8| -> Result<usize> {
        if (q as usize) < n_qubits {
            Ok(q as usize)
        } else {
            Err(PceError::Payload(format!("qubit {q} out of range for {n_qubits} qubits")))
        }
    };
    let mut raw = Vec::with_capacity(n_ops.min(bytes.len() / 7));
    for _ in 0..n_ops {
        let code = r.u8("opcode")?;
        let q0 = r.u8("operand")?;
        let q1 = r.u8("operand")?;
        let slot = i32::from_le_bytes(r.array("slot")?);
        raw.push((code, q0, q1, slot));
    }
    let n_slots = r.u32("slot count")? as usize;
    let n_circuits = r.u32("circuit count")? as usize;

    let mut ops = Vec::with_capacity(raw.len());
    for (code, q0, q1, slot) in raw {
        let op = match code {
            OP_VZ => {
                if slot < 0 || slot as usize >= n_slots {
                    return Err(PceError::Payload(format!("slot index {slot} out of range for {n_slots} slots")));
                }
                NativeOp::Vz { qubit: qubit(q0)?, phase: slot as u32 }
            }
            OP_X90 => NativeOp::X90 { qubit: qubit(q0)? },
            OP_CZ => NativeOp::Cz { a: qubit(q0)?, b: qubit(q1)? },
            OP_MEASURE => NativeOp::Measure { qubit: qubit(q0)? },
            other => return Err(PceError::Payload(format!("unknown opcode {other}"))),
        };
        ops.push(op);
    }

    let total = n_slots
        .checked_mul(n_circuits)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| PceError::Payload("parameter table size overflows".into()))?;
    let chunk = r.take(total, "parameter rows")?;
    let values = chunk
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let table = ParameterTable { n_slots, circuit_ids: (0..n_circuits).collect(), values };
    if r.pos != bytes.len() {
        return Err(PceError::Payload(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((CircuitTemplate { n_qubits, ops, n_slots }, table))
}
