//! Dense states and translation sums on a periodic chain of `N` sites.
//!
//! Basis states are big-endian base-`d` strings: site 0 is the most
//! significant digit. A local operator on `r` sites is a `d^r × d^r` matrix in
//! the same ordering, and `shift(o, i)` acts on sites `i, …, i + r − 1 (mod N)`.

use crate::linalg::{self, c, ZERO};
use crate::mps::SiteTensor;
use crate::{CMat, CVec, Error, Result};

/// Largest chain handled by dense state vectors.
pub const MAX_DENSE_SITES: usize = 16;
/// Largest chain for which full-space dense operators are built.
pub const MAX_DENSE_OPERATOR_SITES: usize = 12;

pub fn hilbert_dim(d: usize, n: usize, max_sites: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::DomainError("chain needs at least one site".into()));
    }
    if n > max_sites {
        return Err(Error::ResourceLimit(format!("N = {n} exceeds dense cap {max_sites}")));
    }
    d.checked_pow(n as u32)
        .ok_or_else(|| Error::ResourceLimit(format!("{d}^{n} overflows")))
}

/// Normalized dense state; `norm` is the norm before normalization.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub amplitudes: CVec,
    pub n: usize,
    pub d: usize,
    pub norm: f64,
}

/// Amplitudes `tr(A^{s_1} ⋯ A^{s_N})`, normalized.
pub fn mps_state_vector(a: &SiteTensor, n: usize) -> Result<DenseState> {
    let (raw, _) = mps_and_tangent_raw(a, None, n)?;
    let norm = linalg::vec_norm(&raw);
    if norm == 0.0 {
        return Err(Error::DomainError(format!("MPS vanishes on N = {n} sites")));
    }
    Ok(DenseState { amplitudes: raw / c(norm, 0.0), n, d: a.d(), norm })
}

/// `Σ_j tr(A ⋯ ∂A_j ⋯ A)` divided by the same norm as [`mps_state_vector`].
pub fn tangent_state_vector(a: &SiteTensor, da: &SiteTensor, n: usize) -> Result<CVec> {
    let (raw, tangent) = mps_and_tangent_raw(a, Some(da), n)?;
    let norm = linalg::vec_norm(&raw);
    if norm == 0.0 {
        return Err(Error::DomainError(format!("MPS vanishes on N = {n} sites")));
    }
    Ok(tangent.expect("requested") / c(norm, 0.0))
}

fn mps_and_tangent_raw(a: &SiteTensor, da: Option<&SiteTensor>, n: usize) -> Result<(CVec, Option<CVec>)> {
    let d = a.d();
    let dim = hilbert_dim(d, n, MAX_DENSE_SITES)?;
    let chi = a.chi();
    // Prefix products, and prefix sums with one derivative inserted.
    let mut prods: Vec<CMat> = vec![CMat::identity(chi, chi)];
    let mut derivs: Option<Vec<CMat>> = da.map(|_| vec![CMat::zeros(chi, chi)]);
    for _ in 0..n {
        let mut next_p = Vec::with_capacity(prods.len() * d);
        for p in &prods {
            for s in 0..d {
                next_p.push(p * a.mat(s));
            }
        }
        if let (Some(qs), Some(da)) = (derivs.as_mut(), da) {
            let mut next_d = Vec::with_capacity(prods.len() * d);
            for (p, q) in prods.iter().zip(qs.iter()) {
                for s in 0..d {
                    next_d.push(q * a.mat(s) + p * da.mat(s));
                }
            }
            *qs = next_d;
        }
        prods = next_p;
    }
    debug_assert_eq!(prods.len(), dim);
    let amps = CVec::from_iterator(dim, prods.iter().map(|p| p.trace()));
    let tangent = derivs.map(|qs| CVec::from_iterator(dim, qs.iter().map(|q| q.trace())));
    Ok((amps, tangent))
}

/// Offsets of every local configuration for the window starting at `start`.
fn window_offsets(d: usize, n: usize, r: usize, start: usize) -> Vec<usize> {
    let weights: Vec<usize> = (0..r).map(|k| d.pow((n - 1 - (start + k) % n) as u32)).collect();
    let local_dim = d.pow(r as u32);
    (0..local_dim)
        .map(|l| {
            let mut rem = l;
            let mut off = 0;
            for k in (0..r).rev() {
                off += (rem % d) * weights[k];
                rem /= d;
            }
            off
        })
        .collect()
}

/// Local index of basis state `x` in a window described by `weights`.
fn local_index(x: usize, d: usize, weights: &[usize]) -> usize {
    weights.iter().fold(0, |acc, &w| acc * d + (x / w) % d)
}

fn window_weights(d: usize, n: usize, r: usize, start: usize) -> Vec<usize> {
    (0..r).map(|k| d.pow((n - 1 - (start + k) % n) as u32)).collect()
}

fn check_local(op: &CMat, d: usize, n: usize) -> Result<usize> {
    let r = crate::mps::range_of(op.nrows(), d)?;
    if n < r {
        return Err(Error::DomainError(format!("chain of {n} sites shorter than operator range {r}")));
    }
    Ok(r)
}

/// `Σ_i shift(op, i) |v⟩` on a periodic chain.
pub fn apply_translation_sum(op: &CMat, v: &CVec, d: usize, n: usize) -> Result<CVec> {
    let r = check_local(op, d, n)?;
    let dim = hilbert_dim(d, n, MAX_DENSE_SITES)?;
    if v.len() != dim {
        return Err(Error::BasisMismatch(format!("state length {} ≠ {dim}", v.len())));
    }
    let mut out = CVec::zeros(dim);
    let local_dim = op.nrows();
    for start in 0..n {
        let offs = window_offsets(d, n, r, start);
        let weights = window_weights(d, n, r, start);
        for x in 0..dim {
            let amp = v[x];
            if amp == ZERO {
                continue;
            }
            let l = local_index(x, d, &weights);
            let base = x - offs[l];
            for lp in 0..local_dim {
                let h = op[(lp, l)];
                if h != ZERO {
                    out[base + offs[lp]] += h * amp;
                }
            }
        }
    }
    Ok(out)
}

/// A dense many-body operator with a checked Hermiticity flag.
#[derive(Clone, Debug)]
pub struct ManyBodyOperator {
    pub matrix: CMat,
    pub hermitian: bool,
}

/// `Σ_{i=0}^{N−1} shift(h, i)` as a dense `d^N × d^N` matrix.
pub fn embed_operator(h: &CMat, d: usize, n: usize) -> Result<ManyBodyOperator> {
    let r = check_local(h, d, n)?;
    let dim = hilbert_dim(d, n, MAX_DENSE_OPERATOR_SITES)?;
    let mut m = CMat::zeros(dim, dim);
    let local_dim = h.nrows();
    for start in 0..n {
        let offs = window_offsets(d, n, r, start);
        let weights = window_weights(d, n, r, start);
        for x in 0..dim {
            let l = local_index(x, d, &weights);
            let base = x - offs[l];
            for lp in 0..local_dim {
                let z = h[(lp, l)];
                if z != ZERO {
                    m[(base + offs[lp], x)] += z;
                }
            }
        }
    }
    let herm_defect = linalg::frobenius(&(h - h.adjoint()));
    let hermitian = herm_defect <= 1e-10 * linalg::frobenius(h).max(1.0);
    Ok(ManyBodyOperator { matrix: m, hermitian })
}

/// Cyclic translation by one site, `|s_0 s_1 ⋯ s_{N−1}⟩ ↦ |s_{N−1} s_0 ⋯ s_{N−2}⟩`.
pub fn translate_index(x: usize, d: usize, n: usize) -> usize {
    let last = x % d;
    x / d + last * d.pow((n - 1) as u32)
}

pub fn translate_state(v: &CVec, d: usize, n: usize) -> CVec {
    let mut out = CVec::zeros(v.len());
    for (x, &z) in v.iter().enumerate() {
        out[translate_index(x, d, n)] = z;
    }
    out
}

/// Dense translation operator.
pub fn translation_matrix(d: usize, n: usize) -> Result<CMat> {
    let dim = hilbert_dim(d, n, MAX_DENSE_OPERATOR_SITES)?;
    let mut t = CMat::zeros(dim, dim);
    for x in 0..dim {
        t[(translate_index(x, d, n), x)] = linalg::ONE;
    }
    Ok(t)
}

/// Single-site operator `op` embedded at `site`.
pub fn site_operator_apply(op: &CMat, site: usize, v: &CVec, d: usize, n: usize) -> CVec {
    let w = d.pow((n - 1 - site) as u32);
    let mut out = CVec::zeros(v.len());
    for (x, &amp) in v.iter().enumerate() {
        if amp == ZERO {
            continue;
        }
        let s = (x / w) % d;
        let base = x - s * w;
        for sp in 0..d {
            let z = op[(sp, s)];
            if z != ZERO {
                out[base + sp * w] += z * amp;
            }
        }
    }
    out
}
