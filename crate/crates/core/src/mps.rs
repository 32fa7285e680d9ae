//! Uniform (translation-invariant) matrix product states.
//!
//! A state on a ring of `N` sites is `Σ_s tr(A^{s_1} ⋯ A^{s_N}) |s⟩`. All of
//! the generator machinery reduces to dense algebra on three objects:
//!
//! - the transfer matrix `T = Σ_s A^s ⊗ conj(A^s)` (`χ² × χ²`), whose
//!   dominant eigenvectors are the environments of the infinite chain;
//! - the block map `M_r` (`d^r × χ²`) sending open bond indices `(a, b)` to the
//!   `r`-site block `(A^{s_1} ⋯ A^{s_r})_{ab}`;
//! - its Moore–Penrose left-inverse `I_r = (M_r† M_r)^{-1} M_r†`.
//!
//! Index conventions: vectorized bond pairs use row-major `(a, b) ↦ a χ + b`.
//! Physical strings are big-endian, the first site is the most significant
//! digit. A right fixed point `R` is the vectorization of the matrix `r` with
//! `Σ_s A^s r A^s† = λ r`, the left fixed point `L` that of `l` with
//! `Σ_s A^s† l A^s = λ l`.

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, ONE, ZERO};
use crate::{CMat, CVec, Error, Result, C64};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Relative singular-value floor below which inversion is refused.
pub const INVERSE_CUTOFF: f64 = 1e-12;
/// Relative gap required between `|λ1|` and `|λ2|`.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Default cap on the block dimension `d^r`.
pub const DEFAULT_BLOCK_CAP: usize = 4096;

/// The tensor `A^s_{ab}` of a uniform MPS.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    mats: Vec<CMat>,
}

impl SiteTensor {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let d = mats.len();
        if d < 2 {
            return Err(Error::InvalidTensor(format!("physical dimension {d} < 2")));
        }
        let chi = mats[0].nrows();
        if chi == 0 {
            return Err(Error::InvalidTensor("bond dimension 0".into()));
        }
        for m in &mats {
            if m.nrows() != chi || m.ncols() != chi {
                return Err(Error::InvalidTensor("matrices must all be χ×χ".into()));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidTensor("non-finite entry".into()));
            }
        }
        Ok(Self { mats })
    }

    pub fn zeros(d: usize, chi: usize) -> Self {
        Self { mats: vec![CMat::zeros(chi, chi); d] }
    }

    /// `χ = 1` tensor from a list of scalar amplitudes.
    pub fn from_scalars(amps: &[C64]) -> Result<Self> {
        Self::new(amps.iter().map(|&z| CMat::from_element(1, 1, z)).collect())
    }

    pub fn d(&self) -> usize { self.mats.len() }

    pub fn chi(&self) -> usize { self.mats[0].nrows() }

    pub fn mat(&self, s: usize) -> &CMat { &self.mats[s] }

    pub fn mats(&self) -> &[CMat] { &self.mats }

    pub fn scaled(&self, z: C64) -> Self {
        Self { mats: self.mats.iter().map(|m| m * z).collect() }
    }

    /// `self + z · other`.
    pub fn axpy(&self, z: C64, other: &SiteTensor) -> Self {
        Self {
            mats: self.mats.iter().zip(&other.mats).map(|(a, b)| a + b * z).collect(),
        }
    }

    /// Gauge transform `Y A^s Y^{-1}`.
    pub fn gauge(&self, y: &CMat, y_inv: &CMat) -> Self {
        Self { mats: self.mats.iter().map(|m| y * m * y_inv).collect() }
    }

    pub fn max_abs_diff(&self, other: &SiteTensor) -> f64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn to_fixture(&self) -> TensorFixture {
        let (d, chi) = (self.d(), self.chi());
        let grab = |f: fn(&C64) -> f64| -> Vec<Vec<Vec<f64>>> {
            (0..d)
                .map(|s| (0..chi).map(|a| (0..chi).map(|b| f(&self.mats[s][(a, b)])).collect()).collect())
                .collect()
        };
        TensorFixture { d, chi, re: grab(|z| z.re), im: grab(|z| z.im) }
    }

    pub fn from_fixture(fx: &TensorFixture) -> Result<Self> {
        let bad = || Error::Parse("tensor fixture shape does not match d/chi".into());
        if fx.re.len() != fx.d || fx.im.len() != fx.d {
            return Err(bad());
        }
        let mut mats = Vec::with_capacity(fx.d);
        for s in 0..fx.d {
            let mut m = CMat::zeros(fx.chi, fx.chi);
            for a in 0..fx.chi {
                let (re_row, im_row) = (fx.re[s].get(a).ok_or_else(bad)?, fx.im[s].get(a).ok_or_else(bad)?);
                if re_row.len() != fx.chi || im_row.len() != fx.chi {
                    return Err(bad());
                }
                for b in 0..fx.chi {
                    m[(a, b)] = c(re_row[b], im_row[b]);
                }
            }
            mats.push(m);
        }
        Self::new(mats)
    }
}

/// JSON fixture layout `{d, chi, re[s][a][b], im[s][a][b]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorFixture {
    pub d: usize,
    pub chi: usize,
    pub re: Vec<Vec<Vec<f64>>>,
    pub im: Vec<Vec<Vec<f64>>>,
}

/// `T = Σ_s A^s ⊗ conj(A^s)` together with its spectrum.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub matrix: CMat,
    /// Sorted by descending modulus.
    pub eigenvalues: Vec<C64>,
}

pub fn transfer_matrix(a: &SiteTensor) -> TransferOperator {
    let chi = a.chi();
    let mut t = CMat::zeros(chi * chi, chi * chi);
    for m in a.mats() {
        t += m.kronecker(&m.map(|z| z.conj()));
    }
    let eigenvalues = linalg::eigenvalues_by_modulus(&t);
    TransferOperator { matrix: t, eigenvalues }
}

impl TransferOperator {
    pub fn chi(&self) -> usize {
        (self.matrix.nrows() as f64).sqrt().round() as usize
    }

    /// `|λ2|`, zero for `χ = 1`.
    pub fn lambda2_abs(&self) -> f64 {
        self.eigenvalues.get(1).map_or(0.0, |z| z.norm())
    }
}

/// Dominant eigenpair of a transfer operator.
#[derive(Clone, Debug)]
pub struct FixedPoints {
    pub lambda1: f64,
    pub left: CVec,
    pub right: CVec,
}

pub fn fixed_points(t: &TransferOperator) -> Result<FixedPoints> {
    let lam = t.eigenvalues[0];
    let l1 = lam.norm();
    let l2 = t.lambda2_abs();
    if l1 - l2 <= DEGENERACY_TOL * l1 {
        return Err(Error::DegenerateDominantEigenvalue { lambda1: l1, lambda2: l2 });
    }
    let n = t.matrix.nrows();
    let shifted = &t.matrix - CMat::identity(n, n) * lam;
    let (mut left, mut right, _) = linalg::smallest_singular_pair(&shifted);
    // One round of refinement against the exact eigenvalue equations.
    right = refine_right(&t.matrix, lam, right);
    left = refine_right(&t.matrix.adjoint(), lam.conj(), left);

    // Hermitian gauge for the fixed-point matrices: real positive trace.
    let chi = t.chi();
    let phase_fix = |v: &mut CVec| {
        let tr: C64 = (0..chi).map(|a| v[a * chi + a]).sum();
        if tr.norm() > 0.0 {
            let ph = tr / tr.norm();
            *v /= ph;
        }
    };
    phase_fix(&mut right);
    phase_fix(&mut left);
    right /= c(linalg::vec_norm(&right), 0.0);
    let overlap = linalg::inner(&left, &right);
    left /= overlap.conj();
    Ok(FixedPoints { lambda1: lam.re, left, right })
}

fn refine_right(t: &CMat, lam: C64, v: CVec) -> CVec {
    // Inverse iteration with a tiny shift; the solve is well-posed because the
    // dominant eigenvalue is isolated.
    let n = t.nrows();
    let shift = lam * c(1.0 + 1e-13, 0.0) + c(1e-14, 0.0);
    let m = t - CMat::identity(n, n) * shift;
    match m.lu().solve(&v) {
        Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
            let nw = linalg::vec_norm(&w);
            if nw > 0.0 { w / c(nw, 0.0) } else { v }
        }
        _ => v,
    }
}

/// A normalized uniform MPS with cached environment data.
#[derive(Clone, Debug)]
pub struct UniformMps {
    tensor: SiteTensor,
    left: CVec,
    right: CVec,
    lambda1: f64,
    lambda2_abs: f64,
    injective_range: Option<usize>,
}

/// Rescales `A` so that the dominant transfer eigenvalue is one and caches the
/// environments, `|λ2|` and the smallest injective range.
pub fn normalize(a: &SiteTensor) -> Result<UniformMps> {
    let t = transfer_matrix(a);
    let fp = fixed_points(&t)?;
    let scale = 1.0 / fp.lambda1.sqrt();
    let tensor = a.scaled(c(scale, 0.0));
    let lambda2_abs = t.lambda2_abs() / fp.lambda1;
    let injective_range = find_injective_range(&tensor, DEFAULT_BLOCK_CAP);
    Ok(UniformMps {
        tensor,
        left: fp.left,
        right: fp.right,
        lambda1: 1.0,
        lambda2_abs,
        injective_range,
    })
}

fn find_injective_range(a: &SiteTensor, cap: usize) -> Option<usize> {
    let target = a.chi() * a.chi();
    let mut r = 1;
    while a.d().checked_pow(r as u32).is_some_and(|n| n <= cap) {
        if let Ok(m) = block_map_capped(a, r, cap) {
            if m.matrix.nrows() >= target && linalg::numerical_rank(&m.matrix, RANK_CUTOFF) == target {
                return Some(r);
            }
        }
        r += 1;
    }
    None
}

impl UniformMps {
    /// Assembles an MPS from precomputed parts; used for gauge-transformed
    /// copies whose environments are known in closed form.
    fn from_parts(tensor: SiteTensor, left: CVec, right: CVec, lambda2_abs: f64, injective_range: Option<usize>) -> Self {
        Self { tensor, left, right, lambda1: 1.0, lambda2_abs, injective_range }
    }

    pub fn tensor(&self) -> &SiteTensor { &self.tensor }
    pub fn d(&self) -> usize { self.tensor.d() }
    pub fn chi(&self) -> usize { self.tensor.chi() }
    pub fn left(&self) -> &CVec { &self.left }
    pub fn right(&self) -> &CVec { &self.right }
    pub fn lambda1(&self) -> f64 { self.lambda1 }
    pub fn lambda2_abs(&self) -> f64 { self.lambda2_abs }
    pub fn injective_range(&self) -> Option<usize> { self.injective_range }

    /// Left environment as a `χ × χ` matrix `l`.
    pub fn left_matrix(&self) -> CMat { unvec(&self.left, self.chi()) }

    /// Right environment as a `χ × χ` matrix `r`.
    pub fn right_matrix(&self) -> CMat { unvec(&self.right, self.chi()) }

    /// Infinite-chain expectation value of an `r`-site operator `x`
    /// (`d^r × d^r`), `⟨ψ| x_{1..r} |ψ⟩`.
    pub fn expectation(&self, x: &CMat) -> Result<C64> {
        let r = range_of(x.nrows(), self.d())?;
        let m = block_map(&self.tensor, r)?;
        Ok(self.sandwich(&m.matrix, x, &m.matrix))
    }

    /// `Σ l_{a'a} r_{bb'} (bra† x ket)_{(a'b'),(ab)}` for two block-shaped maps.
    pub(crate) fn sandwich(&self, bra: &CMat, x: &CMat, ket: &CMat) -> C64 {
        self.contract_environment(&(bra.adjoint() * x * ket))
    }

    /// Closes a `χ² × χ²` bond-space matrix with the environments,
    /// `Σ l_{a'a} r_{bb'} X_{(a'b'),(ab)}`.
    pub fn contract_environment(&self, inner: &CMat) -> C64 {
        let chi = self.chi();
        let (l, r) = (self.left_matrix(), self.right_matrix());
        let mut acc = ZERO;
        for ap in 0..chi {
            for bp in 0..chi {
                for a in 0..chi {
                    for b in 0..chi {
                        acc += l[(ap, a)] * r[(b, bp)] * inner[(ap * chi + bp, a * chi + b)];
                    }
                }
            }
        }
        acc
    }
}

fn unvec(v: &CVec, chi: usize) -> CMat {
    CMat::from_fn(chi, chi, |a, b| v[a * chi + b])
}

fn vec_of(m: &CMat) -> CVec {
    let chi = m.nrows();
    CVec::from_fn(chi * chi, |k, _| m[(k / chi, k % chi)])
}

/// Range `r` with `d^r = dim`.
pub fn range_of(dim: usize, d: usize) -> Result<usize> {
    let mut r = 0;
    let mut n = 1;
    while n < dim {
        n *= d;
        r += 1;
    }
    if n != dim || r == 0 {
        return Err(Error::BasisMismatch(format!("dimension {dim} is not a positive power of {d}")));
    }
    Ok(r)
}

/// `M_r`: `d^r × χ²`, column `(a, b)` is the open-bond block `(A^{s_1}⋯A^{s_r})_{ab}`.
#[derive(Clone, Debug)]
pub struct BlockMap {
    pub matrix: CMat,
    pub range: usize,
}

pub fn block_map(a: &SiteTensor, r: usize) -> Result<BlockMap> {
    block_map_capped(a, r, DEFAULT_BLOCK_CAP)
}

pub fn block_map_capped(a: &SiteTensor, r: usize, cap: usize) -> Result<BlockMap> {
    let matrix = block_with_insertions(a, r, &[], cap)?;
    Ok(BlockMap { matrix, range: r })
}

/// Block map with the tensor at 1-based position `j` replaced by `replacement`.
pub fn block_map_replaced(a: &SiteTensor, r: usize, j: usize, replacement: &SiteTensor) -> Result<BlockMap> {
    if j == 0 || j > r {
        return Err(Error::DomainError(format!("insertion site {j} outside 1..={r}")));
    }
    let matrix = block_with_insertions(a, r, &[(j, replacement)], DEFAULT_BLOCK_CAP)?;
    Ok(BlockMap { matrix, range: r })
}

fn block_with_insertions(a: &SiteTensor, r: usize, ins: &[(usize, &SiteTensor)], cap: usize) -> Result<CMat> {
    if r == 0 {
        return Err(Error::DomainError("block range must be ≥ 1".into()));
    }
    let (d, chi) = (a.d(), a.chi());
    let dim = d
        .checked_pow(r as u32)
        .filter(|&n| n <= cap)
        .ok_or_else(|| Error::ResourceLimit(format!("d^r = {d}^{r} exceeds cap {cap}")))?;
    let pick = |site: usize| -> &SiteTensor {
        ins.iter().find(|(j, _)| *j == site).map_or(a, |(_, t)| *t)
    };
    // Products over prefixes, extended one site at a time (big-endian).
    let mut prods: Vec<CMat> = pick(1).mats().to_vec();
    for site in 2..=r {
        let t = pick(site);
        let mut next = Vec::with_capacity(prods.len() * d);
        for p in &prods {
            for s in 0..d {
                next.push(p * t.mat(s));
            }
        }
        prods = next;
    }
    debug_assert_eq!(prods.len(), dim);
    let mut m = CMat::zeros(dim, chi * chi);
    for (row, p) in prods.iter().enumerate() {
        for a_ in 0..chi {
            for b in 0..chi {
                m[(row, a_ * chi + b)] = p[(a_, b)];
            }
        }
    }
    Ok(m)
}

/// Numerical rank of `M_r` at relative cutoff [`RANK_CUTOFF`].
pub fn injectivity_rank(a: &SiteTensor, r: usize) -> Result<usize> {
    Ok(linalg::numerical_rank(&block_map(a, r)?.matrix, RANK_CUTOFF))
}

/// `I_r = (M_r† M_r)^{-1} M_r†`, `χ² × d^r`.
#[derive(Clone, Debug)]
pub struct LeftInverse {
    pub matrix: CMat,
    pub range: usize,
}

pub fn left_inverse(a: &SiteTensor, r: usize) -> Result<LeftInverse> {
    let m = block_map(a, r)?;
    left_inverse_of(&m)
}

pub fn left_inverse_of(m: &BlockMap) -> Result<LeftInverse> {
    let cols = m.matrix.ncols();
    let sv = linalg::singular_values(&m.matrix);
    let s0 = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > RANK_CUTOFF * s0).count();
    if rank < cols || sv.len() < cols {
        return Err(Error::NotInjective { range: m.range, rank, required: cols });
    }
    let smin = sv[cols - 1];
    if smin < INVERSE_CUTOFF * s0 {
        return Err(Error::IllConditioned(format!(
            "smallest singular value {smin:.3e} of M_{} below {INVERSE_CUTOFF:.0e} × {s0:.3e}",
            m.range
        )));
    }
    let gram = m.matrix.adjoint() * &m.matrix;
    let inv = gram
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .or_else(|| gram.try_inverse())
        .ok_or_else(|| Error::IllConditioned("M†M is singular".into()))?;
    Ok(LeftInverse { matrix: inv * m.matrix.adjoint(), range: m.range })
}

/// Reorders `T^r` into the vertical `(a'b'),(ab)` layout of `M_r† M_r`.
pub fn vertical_reorder(t: &CMat) -> CMat {
    let chi = (t.nrows() as f64).sqrt().round() as usize;
    let mut v = CMat::zeros(chi * chi, chi * chi);
    for a in 0..chi {
        for ap in 0..chi {
            for b in 0..chi {
                for bp in 0..chi {
                    v[(ap * chi + bp, a * chi + b)] = t[(a * chi + ap, b * chi + bp)];
                }
            }
        }
    }
    v
}

/// A derivative tensor satisfying the phase-gauge condition
/// `(L| Σ_s ∂A^s ⊗ conj(A^s) |R) = 0`.
#[derive(Clone, Debug)]
pub struct TangentTensor {
    tensor: SiteTensor,
    removed_overlap: C64,
}

/// Real parts of the removed overlap above this signal a norm-changing
/// parametrization.
pub const NON_IMAGINARY_WARN: f64 = 1e-8;

impl TangentTensor {
    pub fn tensor(&self) -> &SiteTensor { &self.tensor }

    /// The overlap `c` that was subtracted along `A`.
    pub fn removed_overlap(&self) -> C64 { self.removed_overlap }

    /// True if `Re c` exceeds [`NON_IMAGINARY_WARN`].
    pub fn non_imaginary_overlap(&self) -> bool { self.removed_overlap.re.abs() > NON_IMAGINARY_WARN }

    /// Wraps a tensor that is already known to be gauge-fixed.
    pub fn from_projected(tensor: SiteTensor) -> Self {
        Self { tensor, removed_overlap: ZERO }
    }

    /// Transforms to another gauge as `Y ∂A Y^{-1}`.
    pub fn gauge(&self, y: &CMat, y_inv: &CMat) -> Self {
        Self { tensor: self.tensor.gauge(y, y_inv), removed_overlap: self.removed_overlap }
    }
}

/// `(L| Σ_s X^s ⊗ conj(A^s) |R)`.
pub fn tangent_overlap(x: &SiteTensor, psi: &UniformMps) -> C64 {
    let chi = psi.chi();
    let mut mixed = CMat::zeros(chi * chi, chi * chi);
    for (xs, a) in x.mats().iter().zip(psi.tensor().mats()) {
        mixed += xs.kronecker(&a.map(|z| z.conj()));
    }
    linalg::inner(psi.left(), &(mixed * psi.right()))
}

/// Removes the component of `raw` along `A` so the gauge overlap vanishes.
pub fn project_gauge(raw: &SiteTensor, psi: &UniformMps) -> TangentTensor {
    let overlap = tangent_overlap(raw, psi);
    if overlap.re.abs() > NON_IMAGINARY_WARN {
        log::debug!("tangent overlap has real part {:.3e}; removing norm change", overlap.re);
    }
    TangentTensor { tensor: raw.axpy(-overlap, psi.tensor()), removed_overlap: overlap }
}

/// Right-canonical gauge `A' = Y A Y^{-1}` with `r' = 1`, `l' ≥ 0`, `tr l' = 1`.
/// Returns the transformed MPS, `Y` and `Y^{-1}`.
pub fn canonicalize_right(psi: &UniformMps) -> Result<(UniformMps, CMat, CMat)> {
    let chi = psi.chi();
    let r = linalg::hermitian_part(&psi.right_matrix());
    let (vals, _) = linalg::eigh(&r);
    let (rmin, rmax) = (vals[0], vals[vals.len() - 1]);
    if rmax <= 0.0 || rmin <= INVERSE_CUTOFF * rmax {
        return Err(Error::IllConditioned(format!(
            "right fixed point not positive definite (eigenvalues {rmin:.3e} .. {rmax:.3e})"
        )));
    }
    let y = linalg::hermitian_function(&r, |x| c(1.0 / x.sqrt(), 0.0));
    let y_inv = linalg::hermitian_function(&r, |x| c(x.sqrt(), 0.0));
    let tensor = psi.tensor().gauge(&y, &y_inv);
    // l' = Y^{-†} l Y^{-1}, with Y Hermitian.
    let l_new = linalg::hermitian_part(&(&y_inv * psi.left_matrix() * &y_inv));
    let tr: f64 = (0..chi).map(|k| l_new[(k, k)].re).sum();
    let l_new = l_new / c(tr, 0.0);
    let r_new = CMat::identity(chi, chi);
    let out = UniformMps::from_parts(tensor, vec_of(&l_new), vec_of(&r_new), psi.lambda2_abs(), psi.injective_range());
    Ok((out, y, y_inv))
}

/// Eigenvalues of the left fixed point in a right-canonical MPS, ascending.
pub fn left_spectrum(psi: &UniformMps) -> Vec<f64> {
    linalg::eigh(&psi.left_matrix()).0.iter().copied().collect()
}

/// Product-state helper: `χ = 1` tensor with a single unit amplitude.
pub fn basis_product(d: usize, s: usize) -> SiteTensor {
    let mut amps = vec![ZERO; d];
    amps[s] = ONE;
    SiteTensor::from_scalars(&amps).expect("valid product tensor")
}

/// Scalar `χ = 1` tensor from real amplitudes.
pub fn real_product(amps: &[f64]) -> SiteTensor {
    SiteTensor::from_scalars(&amps.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>()).expect("valid tensor")
}

/// The two-component GHZ tensor `A^0 = diag(1,0)`, `A^1 = diag(0,1)`.
pub fn ghz_tensor() -> SiteTensor {
    let a0 = CMat::from_diagonal(&na::DVector::from_vec(vec![ONE, ZERO]));
    let a1 = CMat::from_diagonal(&na::DVector::from_vec(vec![ZERO, ONE]));
    SiteTensor::new(vec![a0, a1]).expect("valid GHZ tensor")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{mps_from_params, PROBE_POINT};

    fn probe() -> SiteTensor {
        mps_from_params(&PROBE_POINT.values)
    }

    #[test]
    fn product_transfer_is_scalar_one() {
        let t = transfer_matrix(&basis_product(2, 0));
        assert_eq!(t.matrix.shape(), (1, 1));
        assert!((t.matrix[(0, 0)] - ONE).norm() < 1e-15);
        let s = 0.5f64.sqrt();
        let t = transfer_matrix(&real_product(&[s, s]));
        assert!((t.matrix[(0, 0)] - ONE).norm() < 1e-15);
        let fp = fixed_points(&t).unwrap();
        assert!((fp.lambda1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ghz_is_degenerate() {
        let t = transfer_matrix(&ghz_tensor());
        assert!(matches!(fixed_points(&t), Err(Error::DegenerateDominantEigenvalue { .. })));
    }

    #[test]
    fn probe_fixed_points_and_normalization() {
        let psi = normalize(&probe()).unwrap();
        let t = transfer_matrix(psi.tensor());
        assert!((psi.lambda1() - 1.0).abs() < 1e-10);
        assert!((t.eigenvalues[0].norm() - 1.0).abs() < 1e-10);
        let res = &t.matrix * psi.right() - psi.right();
        assert!(linalg::vec_norm(&res) < 1e-10);
        let res = t.matrix.adjoint() * psi.left() - psi.left();
        assert!(linalg::vec_norm(&res) < 1e-10);
        assert!((linalg::inner(psi.left(), psi.right()) - ONE).norm() < 1e-10);
        assert!(psi.lambda2_abs() < 1.0);
        assert_eq!(psi.injective_range(), Some(2));
    }

    #[test]
    fn normalize_rescales_and_is_idempotent() {
        let psi = normalize(&real_product(&[2.0, 0.0])).unwrap();
        assert!(psi.tensor().max_abs_diff(&basis_product(2, 0)) < 1e-15);
        let once = normalize(&probe()).unwrap();
        let twice = normalize(once.tensor()).unwrap();
        assert!(once.tensor().max_abs_diff(twice.tensor()) < 1e-12);
    }

    #[test]
    fn block_map_of_product_and_ghz() {
        let m = block_map(&basis_product(2, 0), 2).unwrap();
        assert_eq!(m.matrix.shape(), (4, 1));
        assert!((m.matrix[(0, 0)] - ONE).norm() < 1e-15);
        assert!(m.matrix.rows(1, 3).iter().all(|z| z.norm() == 0.0));
        let g = block_map(&ghz_tensor(), 2).unwrap();
        assert_eq!(linalg::numerical_rank(&g.matrix, RANK_CUTOFF), 2);
        // Only |00⟩ and |11⟩ are reached.
        assert!(g.matrix.row(1).iter().chain(g.matrix.row(2).iter()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn gram_of_block_map_is_reshaped_transfer_power() {
        let a = probe();
        let chi = a.chi();
        let r = 3;
        let m = block_map(&a, r).unwrap().matrix;
        let gram = m.adjoint() * &m;
        let t = transfer_matrix(&a).matrix;
        let mut tr = CMat::identity(chi * chi, chi * chi);
        for _ in 0..r {
            tr = &tr * &t;
        }
        // (M†M)_{(a b),(c d)} = Σ_s conj(B^s_{ab}) B^s_{cd} = (T^r)_{(c a),(d b)}.
        let mut worst: f64 = 0.0;
        for (a1, b1, c1, d1) in (0..chi).flat_map(|a| (0..chi).flat_map(move |b| (0..chi).flat_map(move |c| (0..chi).map(move |d| (a, b, c, d))))) {
            let lhs = gram[(a1 * chi + b1, c1 * chi + d1)];
            let rhs = tr[(c1 * chi + a1, d1 * chi + b1)];
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn injectivity_ranks() {
        assert_eq!(injectivity_rank(&real_product(&[0.6, 0.8]), 1).unwrap(), 1);
        for r in 1..=4 {
            assert_eq!(injectivity_rank(&ghz_tensor(), r).unwrap(), 2);
        }
        assert_eq!(injectivity_rank(&probe(), 2).unwrap(), 4);
        assert!(matches!(left_inverse(&ghz_tensor(), 3), Err(Error::NotInjective { .. }) | Err(Error::IllConditioned(_))));
    }

    #[test]
    fn left_inverse_identities() {
        let li = left_inverse(&basis_product(2, 0), 1).unwrap();
        assert_eq!(li.matrix.shape(), (1, 2));
        assert!((li.matrix[(0, 0)] - ONE).norm() < 1e-15 && li.matrix[(0, 1)].norm() < 1e-15);
        let a = probe();
        let m = block_map(&a, 3).unwrap();
        let li = left_inverse_of(&m).unwrap();
        let res = &li.matrix * &m.matrix - CMat::identity(4, 4);
        assert!(linalg::frobenius(&res) < 1e-10);
        let m2 = block_map(&a, 2).unwrap();
        let li2 = left_inverse_of(&m2).unwrap();
        let comp = linalg::column_space_complement(&m2.matrix);
        assert!(linalg::frobenius(&(&li2.matrix * comp)) < 1e-10);
    }

    #[test]
    fn gauge_projection_cases() {
        let psi = normalize(&probe()).unwrap();
        let once = project_gauge(&probe().scaled(c(0.3, -0.2)).axpy(ONE, &mps_from_params(&[0.1, 0.2, 0.3, 0.4])), &psi);
        let again = project_gauge(once.tensor(), &psi);
        assert!(again.tensor().max_abs_diff(once.tensor()) < 1e-12);
        assert!(tangent_overlap(once.tensor(), &psi).norm() < 1e-10);

        let phase = project_gauge(&psi.tensor().scaled(linalg::I), &psi);
        assert!(phase.tensor().norm() < 1e-12);
        assert!((phase.removed_overlap() - linalg::I).norm() < 1e-12);

        let t: f64 = 0.3;
        let rot = normalize(&real_product(&[t.cos(), t.sin()])).unwrap();
        let tan = project_gauge(&real_product(&[-t.sin(), t.cos()]), &rot);
        assert!(tan.removed_overlap().norm() < 1e-12);
    }

    #[test]
    fn right_canonical_gauge() {
        let (rot, y, _) = canonicalize_right(&normalize(&real_product(&[0.6, 0.8])).unwrap()).unwrap();
        assert!((y[(0, 0)] - ONE).norm() < 1e-12);
        assert!((rot.right()[0] - ONE).norm() < 1e-12);

        let (can, _, _) = canonicalize_right(&normalize(&probe()).unwrap()).unwrap();
        let chi = can.chi();
        assert!(linalg::frobenius(&(can.right_matrix() - CMat::identity(chi, chi))) < 1e-10);
        let tr: C64 = (0..chi).map(|k| can.left_matrix()[(k, k)]).sum();
        assert!((tr - ONE).norm() < 1e-10);
        // The gauge keeps the transfer spectrum and the fixed-point equation.
        let t = transfer_matrix(can.tensor());
        assert!(linalg::vec_norm(&(&t.matrix * can.right() - can.right())) < 1e-10);
        let kappa = left_spectrum(&can)[0];
        assert!(kappa > 0.0, "{kappa}");
    }

    #[test]
    fn invalid_tensors_rejected() {
        assert!(SiteTensor::new(vec![CMat::identity(2, 2)]).is_err());
        let nan = CMat::from_element(1, 1, c(f64::NAN, 0.0));
        assert!(SiteTensor::new(vec![nan.clone(), nan]).is_err());
        assert!(SiteTensor::new(vec![CMat::identity(2, 2), CMat::identity(3, 3)]).is_err());
    }
}
