//! Exact non-Hermitian tangent-space generators and their Hermitian
//! approximations.
//!
//! For a normalized injective MPS and tangent tensor `∂A`, the density
//!
//! ```text
//! o^(j) = i · M_r^(∂, j) · I_r
//! ```
//!
//! maps every `r`-site block of the MPS onto the same block with `∂A` inserted
//! at position `j`. Summed over all translations it reproduces the tangent
//! vector exactly, `−i Σ_i o_i |ψ⟩ = ∂_t|ψ⟩`, on any ring with `N ≥ r`.
//! The factor `i` is stored inside `o`.

mod complement;

pub use complement::{add_complement_term, complement_basis, optimize_complement, ComplementBasis, ComplementFit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain;
use crate::linalg::{self, c, I};
use crate::mps::{self, BlockMap, TangentTensor, UniformMps};
use crate::pauli::PauliExpansion;
use crate::{CMat, CVec, Error, Result};

/// A translation-invariant density acting on `range` contiguous sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    matrix: CMat,
    d: usize,
    range: usize,
}

impl LocalOperator {
    pub fn new(matrix: CMat, d: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::BasisMismatch("local operator must be square".into()));
        }
        let range = mps::range_of(matrix.nrows(), d)?;
        Ok(Self { matrix, d, range })
    }

    pub fn matrix(&self) -> &CMat { &self.matrix }
    pub fn into_matrix(self) -> CMat { self.matrix }
    pub fn d(&self) -> usize { self.d }
    pub fn range(&self) -> usize { self.range }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), d: self.d, range: self.range }
    }

    /// `‖o − o†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::frobenius(&(&self.matrix - self.matrix.adjoint()))
    }
}

/// Default derivative placement `⌈r/2⌉` (1-based).
pub fn middle_site(r: usize) -> usize {
    r.div_ceil(2)
}

/// Per-site derivative weights `α_j`, summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeWeights(Vec<f64>);

impl DerivativeWeights {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::WeightSumViolation(sum));
        }
        Ok(Self(weights))
    }

    /// All weight on the 1-based site `j`.
    pub fn one_hot(r: usize, j: usize) -> Self {
        let mut w = vec![0.0; r];
        w[j - 1] = 1.0;
        Self(w)
    }

    pub fn middle(r: usize) -> Self {
        Self::one_hot(r, middle_site(r))
    }

    pub fn as_slice(&self) -> &[f64] { &self.0 }
    pub fn len(&self) -> usize { self.0.len() }
    pub fn is_empty(&self) -> bool { self.0.is_empty() }
}

/// Everything needed to build generators of range `r` at one point: the block
/// map, the left-inverse and every single-site placement `o^(1..r)`.
#[derive(Clone, Debug)]
pub struct GeneratorParts {
    pub block: BlockMap,
    pub parts: Vec<LocalOperator>,
}

pub fn generator_parts(psi: &UniformMps, tangent: &TangentTensor, r: usize) -> Result<GeneratorParts> {
    let block = mps::block_map(psi.tensor(), r)?;
    let inverse = mps::left_inverse_of(&block)?;
    let parts = (1..=r)
        .map(|j| {
            let inserted = mps::block_map_replaced(psi.tensor(), r, j, tangent.tensor())?;
            LocalOperator::new(inserted.matrix * &inverse.matrix * I, psi.d())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratorParts { block, parts })
}

/// `o^(j) = i M_r^(∂, j) I_r` with the derivative at 1-based site `j`.
pub fn local_generator(psi: &UniformMps, tangent: &TangentTensor, r: usize, j: usize) -> Result<LocalOperator> {
    if j == 0 || j > r {
        return Err(Error::DomainError(format!("derivative site {j} outside 1..={r}")));
    }
    let block = mps::block_map(psi.tensor(), r)?;
    let inverse = mps::left_inverse_of(&block)?;
    let inserted = mps::block_map_replaced(psi.tensor(), r, j, tangent.tensor())?;
    LocalOperator::new(inserted.matrix * inverse.matrix * I, psi.d())
}

/// `Σ_j α_j o^(j)`.
pub fn combine_weights(parts: &[LocalOperator], alpha: &DerivativeWeights) -> Result<LocalOperator> {
    let sum: f64 = alpha.as_slice().iter().sum();
    if (sum - 1.0).abs() > DerivativeWeights::SUM_TOL {
        return Err(Error::WeightSumViolation(sum));
    }
    if parts.len() != alpha.len() || parts.is_empty() {
        return Err(Error::BasisMismatch(format!("{} parts for {} weights", parts.len(), alpha.len())));
    }
    let mut m = CMat::zeros(parts[0].matrix.nrows(), parts[0].matrix.ncols());
    for (p, &w) in parts.iter().zip(alpha.as_slice()) {
        if w != 0.0 {
            m += &p.matrix * c(w, 0.0);
        }
    }
    LocalOperator::new(m, parts[0].d)
}

/// `h = o + o†`.
pub fn hermitize(o: &LocalOperator) -> LocalOperator {
    LocalOperator { matrix: &o.matrix + o.matrix.adjoint(), d: o.d, range: o.range }
}

/// `⟨ψ| o o† |ψ⟩` for a single density on the infinite chain.
pub fn dagger_residual_norm(o: &LocalOperator, psi: &UniformMps) -> Result<f64> {
    let block = mps::block_map(psi.tensor(), o.range)?;
    Ok(dagger_residual_with(o, psi, &block))
}

fn dagger_residual_with(o: &LocalOperator, psi: &UniformMps, block: &BlockMap) -> f64 {
    let x = o.matrix.adjoint() * &block.matrix;
    psi.contract_environment(&(x.adjoint() * x)).re.max(0.0)
}

/// `G_jk = Re ⟨ψ| o^(j) o^(k)† |ψ⟩`.
pub fn gram_matrix(parts: &GeneratorParts, psi: &UniformMps) -> DMatrix<f64> {
    let xs: Vec<CMat> = parts.parts.iter().map(|p| p.matrix.adjoint() * &parts.block.matrix).collect();
    let r = xs.len();
    let mut g = DMatrix::zeros(r, r);
    for j in 0..r {
        for k in j..r {
            let v = psi.contract_environment(&(xs[j].adjoint() * &xs[k])).re;
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    g
}

/// Minimizes `αᵀ G α` subject to `Σ α = 1`; minimum-norm `α` among ties.
pub fn minimize_on_weight_plane(g: &DMatrix<f64>) -> DerivativeWeights {
    let r = g.nrows();
    if r == 1 {
        return DerivativeWeights(vec![1.0]);
    }
    // α = α0 + Z β, α0 = 1/r, Z an orthonormal basis of 1^⊥.
    let alpha0 = DVector::from_element(r, 1.0 / r as f64);
    let z = sum_zero_basis(r);
    let reduced = z.transpose() * g * &z;
    let rhs = -(z.transpose() * g * &alpha0);
    let beta = linalg::lstsq_real(&reduced, &rhs, 1e-12);
    let alpha = alpha0 + z * beta;
    // Renormalize exactly onto the plane.
    let shift = (alpha.sum() - 1.0) / r as f64;
    DerivativeWeights(alpha.iter().map(|a| a - shift).collect())
}

fn sum_zero_basis(r: usize) -> DMatrix<f64> {
    // Helmert-style orthonormal basis of vectors with zero sum.
    let mut z = DMatrix::zeros(r, r - 1);
    for k in 1..r {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            z[(i, k - 1)] = 1.0 / norm;
        }
        z[(k, k - 1)] = -(k as f64) / norm;
    }
    z
}

/// Optimal real derivative weights and the achieved `⟨o o†⟩`.
pub fn optimize_alpha(psi: &UniformMps, tangent: &TangentTensor, r: usize) -> Result<(DerivativeWeights, f64)> {
    let parts = generator_parts(psi, tangent, r)?;
    let g = gram_matrix(&parts, psi);
    let alpha = minimize_on_weight_plane(&g);
    let o = combine_weights(&parts.parts, &alpha)?;
    let norm = dagger_residual_with(&o, psi, &parts.block);
    Ok((alpha, norm))
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    g.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `‖−i Σ_i shift(o, i)|ψ_N⟩ − ∂_t|ψ_N⟩‖₂` on a ring of `n` sites.
pub fn driving_residual(o: &LocalOperator, psi: &UniformMps, tangent: &TangentTensor, n: usize) -> Result<f64> {
    let state = chain::mps_state_vector(psi.tensor(), n)?;
    let target = chain::tangent_state_vector(psi.tensor(), tangent.tensor(), n)?;
    let driven = chain::apply_translation_sum(o.matrix(), &state.amplitudes, psi.d(), n)? * (-I);
    Ok(linalg::vec_norm(&(driven - target)))
}

/// Finite-ring leakage of a Hermitian density.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeakageResidual {
    /// `‖γ‖₂` with `γ = −i Σ h_i |ψ_N⟩ − ∂_t|ψ_N⟩`.
    pub leakage_norm: f64,
    /// `‖γ + i Σ o_i† |ψ_N⟩‖₂`; zero when `o` drives exactly.
    pub identity_residual: f64,
}

pub fn leakage_residual(
    o: &LocalOperator,
    h: &LocalOperator,
    psi: &UniformMps,
    tangent: &TangentTensor,
    n: usize,
) -> Result<LeakageResidual> {
    let state = chain::mps_state_vector(psi.tensor(), n)?;
    let target = chain::tangent_state_vector(psi.tensor(), tangent.tensor(), n)?;
    let gamma: CVec = chain::apply_translation_sum(h.matrix(), &state.amplitudes, psi.d(), n)? * (-I) - target;
    let dag = chain::apply_translation_sum(&o.matrix().adjoint(), &state.amplitudes, psi.d(), n)?;
    let identity = &gamma + dag * I;
    Ok(LeakageResidual { leakage_norm: linalg::vec_norm(&gamma), identity_residual: linalg::vec_norm(&identity) })
}

/// How to assemble a generator at one trajectory point.
#[derive(Clone, Debug, Default)]
pub struct GeneratorOptions {
    /// Optimize `α`; otherwise use `placement` or the middle site.
    pub optimize_alpha: bool,
    /// Explicit 1-based derivative site.
    pub placement: Option<usize>,
    /// Previous Hermitian density to track with complement optimization.
    pub complement_target: Option<PauliExpansion>,
}

/// Non-Hermitian density, its Hermitian part and bookkeeping.
#[derive(Clone, Debug)]
pub struct GeneratorBundle {
    pub o: LocalOperator,
    pub h: LocalOperator,
    pub alpha: DerivativeWeights,
    /// `⟨ψ| o o† |ψ⟩`.
    pub leakage_per_site: f64,
    pub r: usize,
    pub t: Option<f64>,
}

pub fn build_generator(
    psi: &UniformMps,
    tangent: &TangentTensor,
    r: usize,
    opts: &GeneratorOptions,
    t: Option<f64>,
) -> Result<GeneratorBundle> {
    let parts = generator_parts(psi, tangent, r)?;
    let alpha = if opts.optimize_alpha {
        minimize_on_weight_plane(&gram_matrix(&parts, psi))
    } else {
        let j = opts.placement.unwrap_or_else(|| middle_site(r));
        if j == 0 || j > r {
            return Err(Error::DomainError(format!("derivative site {j} outside 1..={r}")));
        }
        DerivativeWeights::one_hot(r, j)
    };
    let mut o = combine_weights(&parts.parts, &alpha)?;
    if let Some(target) = &opts.complement_target {
        let basis = complement_basis(psi, r)?;
        let fit = optimize_complement(target, &o, &basis)?;
        o = fit.o;
    }
    let leakage_per_site = dagger_residual_with(&o, psi, &parts.block);
    let h = hermitize(&o);
    Ok(GeneratorBundle { o, h, alpha, leakage_per_site, r, t })
}

/// JSON record `{r, t, alpha[], leakage_per_site, pauli: {string: coeff}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GeneratorRecord {
    pub r: usize,
    pub t: Option<f64>,
    pub alpha: Vec<f64>,
    pub leakage_per_site: f64,
    pub pauli: std::collections::BTreeMap<String, f64>,
}

impl GeneratorBundle {
    pub fn record(&self) -> Result<GeneratorRecord> {
        let expansion = PauliExpansion::canonical(&self.h)?;
        Ok(GeneratorRecord {
            r: self.r,
            t: self.t,
            alpha: self.alpha.as_slice().to_vec(),
            leakage_per_site: self.leakage_per_site,
            pauli: expansion.to_map(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{normalize, project_gauge, real_product};
    use crate::pauli::pauli_matrix;
    use crate::trajectory::{point_state, PROBE_POINT};

    fn rotation_start() -> (UniformMps, TangentTensor) {
        let psi = normalize(&real_product(&[1.0, 0.0])).unwrap();
        let tan = project_gauge(&real_product(&[0.0, 1.0]), &psi);
        (psi, tan)
    }

    #[test]
    fn single_spin_rotation_generator() {
        let (psi, tan) = rotation_start();
        let o = local_generator(&psi, &tan, 1, 1).unwrap();
        let mut expect = CMat::zeros(2, 2);
        expect[(1, 0)] = I;
        assert!(linalg::frobenius(&(o.matrix() - &expect)) < 1e-15);
        assert!(linalg::frobenius(&(hermitize(&o).into_matrix() - pauli_matrix(2))) < 1e-15);
        assert!(dagger_residual_norm(&o, &psi).unwrap() < 1e-15);
        let lr = leakage_residual(&o, &hermitize(&o), &psi, &tan, 4).unwrap();
        assert!(lr.leakage_norm < 1e-14);
    }

    #[test]
    fn product_state_is_driven_linearly() {
        let (psi, _) = rotation_start();
        let tan = project_gauge(&real_product(&[0.0, 2.5]), &psi);
        let o = local_generator(&psi, &tan, 1, 1).unwrap();
        assert!(driving_residual(&o, &psi, &tan, 5).unwrap() < 1e-14);
    }

    #[test]
    fn exact_driving_at_probe_point() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        for j in 1..=3 {
            let o = local_generator(&psi, &tan, 3, j).unwrap();
            assert!(driving_residual(&o, &psi, &tan, 8).unwrap() < 1e-10);
        }
    }

    #[test]
    fn weighted_combinations_stay_exact() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let parts = generator_parts(&psi, &tan, 2).unwrap();
        let one = combine_weights(&parts.parts, &DerivativeWeights::one_hot(2, 2)).unwrap();
        assert_eq!(one, parts.parts[1]);
        for w in [vec![0.5, 0.5], vec![1.5, -0.5]] {
            let o = combine_weights(&parts.parts, &DerivativeWeights::new(w).unwrap()).unwrap();
            assert!(driving_residual(&o, &psi, &tan, 8).unwrap() < 1e-10);
        }
        assert!(matches!(DerivativeWeights::new(vec![0.5, 0.6]), Err(Error::WeightSumViolation(_))));
        assert!(local_generator(&psi, &tan, 3, 4).is_err());
    }

    #[test]
    fn weight_plane_minimum() {
        let w = minimize_on_weight_plane(&DMatrix::identity(4, 4));
        assert!(w.as_slice().iter().all(|a| (a - 0.25).abs() < 1e-15));
        assert_eq!(minimize_on_weight_plane(&DMatrix::from_element(1, 1, 3.0)).as_slice(), &[1.0]);
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let w = minimize_on_weight_plane(&g);
        assert!((w.as_slice()[0] - 0.2).abs() < 1e-14 && (w.as_slice()[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn single_site_range_has_no_freedom() {
        let (psi, tan) = rotation_start();
        let (alpha, norm) = optimize_alpha(&psi, &tan, 1).unwrap();
        assert_eq!(alpha.as_slice(), &[1.0]);
        let o = local_generator(&psi, &tan, 1, 1).unwrap();
        assert_eq!(norm, dagger_residual_norm(&o, &psi).unwrap());
    }

    #[test]
    fn optimized_weights_beat_middle_placement() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let r = 7;
        let middle = dagger_residual_norm(&local_generator(&psi, &tan, r, middle_site(r)).unwrap(), &psi).unwrap();
        let (alpha, best) = optimize_alpha(&psi, &tan, r).unwrap();
        assert!(best < middle, "{best} vs {middle}");
        assert!((alpha.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // The Gram form reproduces the directly contracted norm.
        let parts = generator_parts(&psi, &tan, r).unwrap();
        let g = gram_matrix(&parts, &psi);
        let a = DVector::from_column_slice(alpha.as_slice());
        assert!(((a.transpose() * &g * &a)[(0, 0)] - best).abs() < 1e-10 * middle);
        assert!(min_eigenvalue(&g) > -1e-12);
    }

    #[test]
    fn hermitize_cases() {
        let h = LocalOperator::new(pauli_matrix(3), 2).unwrap();
        assert!(linalg::frobenius(&(hermitize(&h).into_matrix() - pauli_matrix(3) * c(2.0, 0.0))) < 1e-15);
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn leakage_identity_at_probe_point() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let o = local_generator(&psi, &tan, 3, 2).unwrap();
        let lr = leakage_residual(&o, &hermitize(&o), &psi, &tan, 8).unwrap();
        assert!(lr.identity_residual < 1e-10);
        assert!(lr.leakage_norm > 1e-3);
    }

    #[test]
    fn finite_ring_leakage_decreases_with_range() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let norms: Vec<f64> = (2..=5)
            .map(|r| {
                let o = local_generator(&psi, &tan, r, middle_site(r)).unwrap();
                leakage_residual(&o, &hermitize(&o), &psi, &tan, 10).unwrap().leakage_norm
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn complement_dimensions_and_kernel() {
        let (psi, _) = point_state(&PROBE_POINT).unwrap();
        let b = complement_basis(&psi, 3).unwrap();
        assert_eq!(b.dim(), 4);
        let m = mps::block_map(psi.tensor(), 3).unwrap().matrix;
        assert!(linalg::frobenius(&(m.adjoint() * &b.vectors)) < 1e-10);
        assert_eq!(complement_basis(&psi, 2).unwrap().dim(), 0);

        let (up, _) = rotation_start();
        let b = complement_basis(&up, 1).unwrap();
        assert_eq!(b.dim(), 1);
        assert!(b.vectors[(0, 0)].norm() < 1e-15 && (b.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_term_edge_cases() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let o = local_generator(&psi, &tan, 3, 2).unwrap();
        let b = complement_basis(&psi, 3).unwrap();
        assert_eq!(add_complement_term(&o, &b, &CMat::zeros(4, 4)).unwrap(), o);
        assert!(matches!(add_complement_term(&o, &b, &CMat::zeros(3, 3)), Err(Error::BasisMismatch(_))));
        let empty = complement_basis(&psi, 2).unwrap();
        let o2 = local_generator(&psi, &tan, 2, 1).unwrap();
        let target = PauliExpansion::canonical(&hermitize(&o)).unwrap();
        let fit = optimize_complement(&target, &o2, &empty).unwrap();
        assert_eq!(fit.o, o2);
        assert_eq!(fit.distance_after, fit.distance_before);
    }

    #[test]
    fn complement_fit_improves_and_stays_exact() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let prev = hermitize(&local_generator(&psi, &tan, 3, 2).unwrap());
        let target = PauliExpansion::canonical(&prev).unwrap();
        let o = local_generator(&psi, &tan, 4, 2).unwrap();
        let fit = optimize_complement(&target, &o, &complement_basis(&psi, 4).unwrap()).unwrap();
        assert!(fit.distance_after <= fit.distance_before);
        assert!(linalg::frobenius(&(&fit.coeffs - fit.coeffs.adjoint())) < 1e-12);
        assert!(driving_residual(&fit.o, &psi, &tan, 8).unwrap() < 1e-10);
    }

    #[test]
    fn bundle_record_round_trips() {
        let (psi, tan) = point_state(&PROBE_POINT).unwrap();
        let b = build_generator(&psi, &tan, 3, &GeneratorOptions::default(), Some(0.5)).unwrap();
        assert_eq!(b.alpha.as_slice(), &[0.0, 1.0, 0.0]);
        let rec = b.record().unwrap();
        let text = serde_json::to_string(&rec).unwrap();
        let back: GeneratorRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
        assert!(rec.pauli.values().all(|v| v.is_finite()));
    }
}
