//! Pauli strings in symplectic form and real/complex linear combinations of them.
//!
//! A string on `n` qubits is stored as two bit masks: bit `i` of `x` and `z`
//! gives the letter on site `i` as (0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z. Products
//! are XORs of the masks plus a phase exponent in Z/4.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PceError, Result};

pub const DEFAULT_PRUNE: f64 = 1e-12;

/// Single-site Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A power of `i`: the exponent is kept mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(e: u32) -> Self {
        Phase((e % 4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self::from_masks(n_qubits, 0, 0).expect("identity masks are always valid")
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 64 {
            return Err(PceError::TooManyQubits(n_qubits));
        }
        let mask = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        if (x | z) & !mask != 0 {
            return Err(PceError::ParsePauli(format!("masks wider than {n_qubits} qubits")));
        }
        Ok(Self { n_qubits, x, z })
    }

    /// Builds a string from `(site, letter)` pairs; unspecified sites are I.
    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut x = 0u64;
        let mut z = 0u64;
        for &(site, letter) in sites {
            if site >= n_qubits {
                return Err(PceError::QubitOutOfRange { qubit: site, n_qubits });
            }
            let (bx, bz) = letter.bits();
            x = (x & !(1 << site)) | ((bx as u64) << site);
            z = (z & !(1 << site)) | ((bz as u64) << site);
        }
        Self::from_masks(n_qubits, x, z)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn letter(&self, site: usize) -> Pauli {
        Pauli::from_bits((self.x >> site) & 1 == 1, (self.z >> site) & 1 == 1)
    }

    /// Non-identity sites in increasing order.
    pub fn support(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        (0..self.n_qubits).filter_map(move |i| match self.letter(i) {
            Pauli::I => None,
            p => Some((i, p)),
        })
    }

    fn check(&self, other: &PauliString) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(PceError::QubitMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        Ok(())
    }

    /// Operator product `self · other = phase · r`.
    ///
    /// Writing each string as `i^{y} X^x Z^z`, the product picks up
    /// `(-1)^{|z1 & x2|}` from moving `Z^z1` past `X^x2`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        self.check(other)?;
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let e = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones() + 4
            - ((x & z).count_ones() % 4);
        Ok((Phase::from_exponent(e), PauliString { n_qubits: self.n_qubits, x, z }))
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check(other)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// `[self, other]`, or `None` when the strings commute.
    pub fn commutator(&self, other: &PauliString) -> Result<Option<(Complex64, PauliString)>> {
        if self.commutes(other)? {
            return Ok(None);
        }
        let (phase, r) = self.multiply(other)?;
        Ok(Some((phase.to_complex() * 2.0, r)))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.z, self.x, self.n_qubits).cmp(&(other.z, other.x, other.n_qubits))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n_qubits {
            write!(f, "{}", self.letter(i).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = PceError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let n = s.chars().count();
        if n == 0 {
            return Err(PceError::ParsePauli(s.to_string()));
        }
        if n > 64 {
            return Err(PceError::TooManyQubits(n));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (i, c) in s.chars().enumerate() {
            let (bx, bz) = match c.to_ascii_uppercase() {
                'I' => Pauli::I.bits(),
                'X' => Pauli::X.bits(),
                'Y' => Pauli::Y.bits(),
                'Z' => Pauli::Z.bits(),
                _ => return Err(PceError::ParsePauli(s.to_string())),
            };
            x |= (bx as u64) << i;
            z |= (bz as u64) << i;
        }
        Self::from_masks(n, x, z)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Linear combination of Pauli strings, kept in canonical string order.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
    prune: f64,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self::with_prune(n_qubits, DEFAULT_PRUNE)
    }

    pub fn with_prune(n_qubits: usize, prune: f64) -> Self {
        Self { n_qubits, terms: BTreeMap::new(), prune }
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut sum = Self::new(n_qubits);
        for (p, c) in terms {
            sum.add_term(p, c)?;
        }
        Ok(sum)
    }

    /// Real-coefficient sum parsed from `(text, coefficient)` pairs.
    pub fn from_real(terms: &[(&str, f64)]) -> Result<Self> {
        let first: PauliString = terms
            .first()
            .ok_or_else(|| PceError::InvalidHamiltonian("no terms".into()))?
            .0
            .parse()?;
        let mut sum = Self::new(first.n_qubits());
        for (text, c) in terms {
            sum.add_term(text.parse()?, Complex64::new(*c, 0.0))?;
        }
        Ok(sum)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.keys()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, p: PauliString, c: Complex64) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(PceError::QubitMismatch { left: self.n_qubits, right: p.n_qubits() });
        }
        let entry = self.terms.entry(p).or_default();
        *entry += c;
        if entry.norm() < self.prune {
            self.terms.remove(&p);
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add_term(*p, *c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> PauliSum {
        let mut out = PauliSum::with_prune(self.n_qubits, self.prune);
        for (p, c) in self.iter() {
            let v = c * s;
            if v.norm() >= self.prune {
                out.terms.insert(*p, v);
            }
        }
        out
    }

    /// Normalized trace inner product `tr(A† B) / 2^n`.
    pub fn inner(&self, other: &PauliSum) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(PceError::QubitMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        let (small, large, flip) =
            if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = Complex64::default();
        for (p, c) in small.iter() {
            if let Some(d) = large.terms.get(p) {
                acc += if flip { d.conj() * c } else { c.conj() * d };
            }
        }
        Ok(acc)
    }

    /// Coefficient-space Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{}*{p}", c.re)?;
            } else {
                write!(f, "({}{:+}i)*{p}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn text_round_trip() {
        for s in ["XXI", "IYZ", "Z", "IIII"] {
            assert_eq!(ps(s).to_string(), s);
        }
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn site_zero_is_low_bit() {
        let p = ps("XIZ");
        assert_eq!(p.x_mask(), 0b001);
        assert_eq!(p.z_mask(), 0b100);
        assert_eq!(ps("Y").y_count(), 1);
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(ps("X").multiply(&ps("X")).unwrap(), (Phase::ONE, ps("I")));
        assert_eq!(ps("X").multiply(&ps("Y")).unwrap(), (Phase::I, ps("Z")));
        assert_eq!(ps("XZ").multiply(&ps("ZZ")).unwrap(), (Phase::MINUS_I, ps("YI")));
    }

    #[test]
    fn commutator_examples() {
        assert!(!ps("X").commutes(&ps("Z")).unwrap());
        assert!(ps("XI").commutes(&ps("IZ")).unwrap());
        assert!(ps("XX").commutes(&ps("YY")).unwrap());
        assert_eq!(
            ps("X").commutator(&ps("Y")).unwrap(),
            Some((Complex64::new(0.0, 2.0), ps("Z")))
        );
        assert_eq!(ps("XX").commutator(&ps("YY")).unwrap(), None);
        assert_eq!(
            ps("XX").commutator(&ps("ZI")).unwrap(),
            Some((Complex64::new(0.0, -2.0), ps("YX")))
        );
    }

    #[test]
    fn mismatch_is_an_error() {
        assert!(matches!(
            ps("X").multiply(&ps("XX")),
            Err(PceError::QubitMismatch { left: 1, right: 2 })
        ));
        assert!(ps("X").commutes(&ps("XX")).is_err());
    }

    #[test]
    fn canonical_order_is_z_then_x() {
        let mut v = [ps("YY"), ps("IZ"), ps("ZI"), ps("XX")];
        v.sort();
        let text: Vec<_> = v.iter().map(|p| p.to_string()).collect();
        assert_eq!(text, ["XX", "ZI", "IZ", "YY"]);
    }

    #[test]
    fn sum_prunes_cancelled_terms() {
        let mut s = PauliSum::from_real(&[("XX", 1.0), ("ZI", 0.5)]).unwrap();
        s.add_term(ps("XX"), Complex64::new(-1.0, 0.0)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coefficient(&ps("ZI")), Complex64::new(0.5, 0.0));
        let t = s.scale(Complex64::new(1e-13, 0.0));
        assert!(t.is_empty());
    }

    #[test]
    fn inner_product_matches_coefficients() {
        let a = PauliSum::from_real(&[("XX", 1.0), ("ZI", 2.0)]).unwrap();
        let b = PauliSum::from_real(&[("ZI", 3.0), ("YY", 1.0)]).unwrap();
        assert_eq!(a.inner(&b).unwrap(), Complex64::new(6.0, 0.0));
    }

    #[test]
    fn serde_uses_text_form() {
        let json = serde_json::to_string(&ps("XYZ")).unwrap();
        assert_eq!(json, "\"XYZ\"");
        let back: PauliString = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ps("XYZ"));
    }
}
