//! Small dense-algebra helpers on top of nalgebra.

use nalgebra as na;
use na::{DMatrix, DVector};

use crate::{CMat, CVec, C64};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩` with the first argument conjugated.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Eigenvalues of a general complex matrix, sorted by descending modulus.
pub fn eigenvalues_by_modulus(m: &CMat) -> Vec<C64> {
    let schur = na::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    let mut ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    na::linalg::SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Number of singular values above `rel_cutoff` times the largest one.
pub fn numerical_rank(m: &CMat, rel_cutoff: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&s0) if s0 > 0.0 => sv.iter().filter(|&&s| s > rel_cutoff * s0).count(),
        _ => 0,
    }
}

pub fn trace_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

/// Null vectors of `m` (right singular vectors for the smallest singular
/// value) as `(left, right)` with `left† m ≈ 0` and `m right ≈ 0`.
pub fn smallest_singular_pair(m: &CMat) -> (CVec, CVec, f64) {
    let svd = na::linalg::SVD::new(m.clone(), true, true);
    let n = svd.singular_values.len();
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let left = u.column(n - 1).into_owned();
    let right = v_t.row(n - 1).adjoint();
    (left, right, svd.singular_values[n - 1])
}

/// Hermitian part `(m + m†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
pub fn eigh(m: &CMat) -> (DVector<f64>, CMat) {
    let eig = na::linalg::SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = eigh(m);
    let mut scaled = vecs.clone();
    for (k, &lam) in vals.iter().enumerate() {
        let fk = f(lam);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= fk;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(−i k)` for Hermitian `k`; exactly unitary up to roundoff.
pub fn unitary_exp(k: &CMat) -> CMat {
    hermitian_function(k, |lam| C64::from_polar(1.0, -lam))
}

/// Moore–Penrose pseudo-inverse of a real matrix with a relative cutoff.
pub fn pinv_real(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = na::linalg::SVD::new(m.clone(), true, true);
    let s0 = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().expect("u");
    let v_t = svd.v_t.as_ref().expect("v");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * s0 && s > 0.0 {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `a x ≈ b` (real).
pub fn lstsq_real(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    pinv_real(a, rel_cutoff) * b
}

/// Orthonormal basis (columns) of the orthogonal complement of the column
/// space of `m`, which must have full column rank.
pub fn column_space_complement(m: &CMat) -> CMat {
    let rows = m.nrows();
    let gram = m.adjoint() * m;
    let gram_inv = gram
        .try_inverse()
        .expect("column_space_complement needs full column rank");
    let proj = m * gram_inv * m.adjoint();
    let comp = CMat::identity(rows, rows) - proj;
    let (vals, vecs) = eigh(&comp);
    let keep: Vec<usize> = (0..rows).filter(|&k| vals[k] > 0.5).collect();
    let mut out = CMat::zeros(rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &vecs.column(src));
    }
    out
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}
