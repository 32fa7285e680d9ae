//! Pauli-string expansions of spin-½ densities.
//!
//! A density `h` on `r` sites expands as `h = Σ_s c_s σ_s` with
//! `c_s = 2^{−r} tr(σ_s h)`. Strings are written over `{0, x, y, z}` with
//! site 0 first. Because a density only matters through its translation sum,
//! `𝟙 ⊗ σ^z` and `σ^z ⊗ 𝟙` describe the same operator; the canonical form
//! strips leading and trailing identities and accumulates the coefficients
//! of equivalent strings. The all-identity component is kept as a separate
//! scalar.

use std::collections::BTreeMap;

use crate::generator::LocalOperator;
use crate::linalg::{c, I, ONE, ZERO};
use crate::{CMat, Error, Result, C64};

const SYMBOLS: [char; 4] = ['0', 'x', 'y', 'z'];

/// Key used for the all-identity component in serialized maps.
pub const IDENTITY_KEY: &str = "0";

/// Single-site Pauli matrix for symbol index `k` (`0 = 𝟙, 1 = x, 2 = y, 3 = z`).
pub fn pauli_matrix(k: usize) -> CMat {
    match k {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Dense matrix of a Pauli string given as symbol indices.
pub fn string_matrix(symbols: &[usize]) -> CMat {
    symbols.iter().fold(CMat::identity(1, 1), |acc, &k| acc.kronecker(&pauli_matrix(k)))
}

fn digits(index: usize, r: usize) -> Vec<usize> {
    (0..r).map(|k| (index >> (2 * (r - 1 - k))) & 3).collect()
}

pub fn string_label(symbols: &[usize]) -> String {
    symbols.iter().map(|&k| SYMBOLS[k]).collect()
}

pub fn parse_label(label: &str) -> Result<Vec<usize>> {
    label
        .chars()
        .map(|ch| SYMBOLS.iter().position(|&s| s == ch).ok_or_else(|| Error::Parse(format!("bad Pauli symbol '{ch}'"))))
        .collect()
}

/// `tr(σ_s m)` for a string encoded as base-4 digits, site 0 most significant.
fn string_trace(m: &CMat, symbols: &[usize]) -> C64 {
    let r = symbols.len();
    let mut flip = 0usize;
    for (k, &s) in symbols.iter().enumerate() {
        if s == 1 || s == 2 {
            flip |= 1 << (r - 1 - k);
        }
    }
    let mut acc = ZERO;
    for i in 0..(1usize << r) {
        let j = i ^ flip;
        // σ_s[i, j] as a product of single-site entries.
        let mut phase = ONE;
        for (k, &s) in symbols.iter().enumerate() {
            let bit = (i >> (r - 1 - k)) & 1;
            match s {
                2 => phase *= if bit == 0 { -I } else { I },
                3 if bit == 1 => phase = -phase,
                _ => {}
            }
        }
        acc += phase * m[(j, i)];
    }
    acc
}

fn check_qubits(m: &CMat, d: usize) -> Result<usize> {
    if d != 2 {
        return Err(Error::Unsupported(format!("Pauli expansion needs d = 2, got d = {d}")));
    }
    crate::mps::range_of(m.nrows(), 2)
}

/// All `4^r` coefficients `c_s = 2^{−r} tr(σ_s m)`, indexed by the base-4
/// string code.
pub fn raw_coefficients(m: &CMat) -> Result<Vec<C64>> {
    let r = check_qubits(m, 2)?;
    let scale = 1.0 / (1usize << r) as f64;
    Ok((0..(1usize << (2 * r))).map(|code| string_trace(m, &digits(code, r)) * scale).collect())
}

/// Strips leading and trailing identities; `None` for the all-identity string.
pub fn canonical_symbols(symbols: &[usize]) -> Option<&[usize]> {
    let first = symbols.iter().position(|&s| s != 0)?;
    let last = symbols.iter().rposition(|&s| s != 0)?;
    Some(&symbols[first..=last])
}

/// Canonical Pauli expansion of a translation-invariant density.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliExpansion {
    terms: BTreeMap<String, f64>,
    identity: f64,
    /// Largest imaginary part discarded from a coefficient.
    max_imag: f64,
}

impl PauliExpansion {
    pub fn canonical(h: &LocalOperator) -> Result<Self> {
        Self::from_matrix(h.matrix(), h.d())
    }

    pub fn from_matrix(m: &CMat, d: usize) -> Result<Self> {
        let r = check_qubits(m, d)?;
        let raw = raw_coefficients(m)?;
        let mut out = Self::default();
        for (code, z) in raw.iter().enumerate() {
            out.max_imag = out.max_imag.max(z.im.abs());
            if z.re == 0.0 {
                continue;
            }
            let symbols = digits(code, r);
            match canonical_symbols(&symbols) {
                None => out.identity += z.re,
                Some(core) => *out.terms.entry(string_label(core)).or_insert(0.0) += z.re,
            }
        }
        Ok(out)
    }

    pub fn from_terms(terms: BTreeMap<String, f64>, identity: f64) -> Result<Self> {
        let mut out = Self { terms: BTreeMap::new(), identity, max_imag: 0.0 };
        for (label, v) in terms {
            let symbols = parse_label(&label)?;
            match canonical_symbols(&symbols) {
                None => out.identity += v,
                Some(core) => *out.terms.entry(string_label(core)).or_insert(0.0) += v,
            }
        }
        Ok(out)
    }

    pub fn terms(&self) -> &BTreeMap<String, f64> { &self.terms }
    pub fn identity(&self) -> f64 { self.identity }
    pub fn max_imag(&self) -> f64 { self.max_imag }

    pub fn get(&self, label: &str) -> f64 {
        self.terms.get(label).copied().unwrap_or(0.0)
    }

    /// Longest canonical string.
    pub fn max_support(&self) -> usize {
        self.terms.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    /// `Σ c_s²` grouped by support length; index 0 holds the identity weight.
    pub fn support_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.max_support() + 1];
        w[0] = self.identity * self.identity;
        for (k, v) in &self.terms {
            w[k.len()] += v * v;
        }
        w
    }

    /// Left-aligned `r`-site density with the canonical content.
    pub fn reconstruct(&self, r: usize) -> Result<CMat> {
        if self.max_support() > r {
            return Err(Error::DomainError(format!("expansion has support {} > {r}", self.max_support())));
        }
        let dim = 1usize << r;
        let mut m = CMat::identity(dim, dim) * c(self.identity, 0.0);
        for (label, &v) in &self.terms {
            let mut symbols = parse_label(label)?;
            symbols.resize(r, 0);
            m += string_matrix(&symbols) * c(v, 0.0);
        }
        Ok(m)
    }

    /// Map for serialization; the identity sits under [`IDENTITY_KEY`].
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut m = self.terms.clone();
        if self.identity != 0.0 {
            m.insert(IDENTITY_KEY.to_string(), self.identity);
        }
        m
    }

    /// Coefficient vector over `keys`, missing strings read as zero.
    pub fn vector(&self, keys: &[String]) -> Vec<f64> {
        keys.iter().map(|k| self.get(k)).collect()
    }
}

/// `sqrt(Σ_s (c_s^a − c_s^b)²)` over the union of canonical strings.
///
/// The identity scalar is left out: it shifts every quasi-energy equally and
/// has no effect on the driven state beyond a global phase.
pub fn operator_distance(a: &PauliExpansion, b: &PauliExpansion) -> f64 {
    let mut acc = 0.0;
    for (k, va) in &a.terms {
        let d = va - b.get(k);
        acc += d * d;
    }
    for (k, vb) in &b.terms {
        if !a.terms.contains_key(k) {
            acc += vb * vb;
        }
    }
    acc.sqrt()
}

/// Every canonical label with support `1..=r`, in a fixed order.
pub fn canonical_labels(r: usize) -> Vec<String> {
    let mut out = Vec::new();
    for len in 1..=r {
        for code in 0..(1usize << (2 * len)) {
            let symbols = digits(code, len);
            if symbols[0] != 0 && symbols[len - 1] != 0 {
                out.push(string_label(&symbols));
            }
        }
    }
    out
}
