//! Numerical audit of the leakage bound for the middle-site generator.
//!
//! Every ingredient is evaluated in the right-canonical gauge (`r = 𝟙`,
//! `tr l = 1`): the constant `C(χ, |λ₂|)`, the transfer-convergence
//! envelope `ε(ℓ) = χ C |λ₂|^ℓ ℓ^{χ²−1}`, the rate
//! `β = ‖Σ_s |A^s)(D_tA^s|‖₂`, the conditioning `κ = λ_min(l)`, and the
//! per-density right-hand side
//!
//! ```text
//! sqrt(8 β² χ⁵ C / (κ |λ₂|)) · |λ₂|^{r/2} · ((r − 1)/2)^{(χ² − 1)/2}.
//! ```
//!
//! The derivation only applies once `ε(r) ≤ κ/2`; below that range the
//! report records the precondition as unmet and `holds` stays `None`.

use std::f64::consts::E;

use serde::Serialize;

use crate::generator::{self, DerivativeWeights, GeneratorOptions};
use crate::linalg;
use crate::mps::{self, TangentTensor, UniformMps};
use crate::{CMat, Error, Result};

pub fn bound_constant(chi: usize, lambda2_abs: f64) -> Result<f64> {
    if !(lambda2_abs > 0.0 && lambda2_abs < 1.0) {
        return Err(Error::DomainError(format!("|λ2| = {lambda2_abs} outside (0, 1)")));
    }
    let chi_f = chi as f64;
    let exponent = (chi * chi - 1) as i32;
    let growth = (1.0f64).max((1.0 - lambda2_abs * lambda2_abs) / lambda2_abs);
    Ok(4.0 * E * E * chi_f * (chi_f * chi_f + 1.0) * (2.0 / (1.0 - lambda2_abs)).powf(1.5) * growth.powi(exponent))
}

pub fn epsilon(chi: usize, lambda2_abs: f64, l: f64) -> Result<f64> {
    if l < 1.0 {
        return Err(Error::DomainError(format!("ℓ = {l} < 1")));
    }
    let cc = bound_constant(chi, lambda2_abs)?;
    Ok(chi as f64 * cc * lambda2_abs.powf(l) * l.powi((chi * chi - 1) as i32))
}

/// Spectral norm of `Σ_s vec(A^s) vec(D^s)^H`.
pub fn beta(a: &UniformMps, dt: &TangentTensor) -> f64 {
    let chi = a.chi();
    let mut m = CMat::zeros(chi * chi, chi * chi);
    for (x, y) in a.tensor().mats().iter().zip(dt.tensor().mats()) {
        let vx = CMat::from_fn(chi * chi, 1, |k, _| x[(k / chi, k % chi)]);
        let vy = CMat::from_fn(chi * chi, 1, |k, _| y[(k / chi, k % chi)]);
        m += vx * vy.adjoint();
    }
    linalg::singular_values(&m).first().copied().unwrap_or(0.0)
}

/// `‖T_v^ℓ − L ⊗ R‖₁` in vertical ordering.
pub fn vertical_transfer_deviation(psi: &UniformMps, l: usize) -> Result<f64> {
    let block = mps::block_map(psi.tensor(), l)?;
    let tv = block.matrix.adjoint() * &block.matrix;
    let limit = mps::vertical_reorder(&(psi.right() * psi.left().adjoint()));
    Ok(linalg::trace_norm(&(tv - limit)))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub r: usize,
    pub l: f64,
    pub chi: usize,
    pub lambda2_abs: f64,
    pub c_const: f64,
    pub kappa: f64,
    pub beta: f64,
    pub epsilon_l: f64,
    pub epsilon_r: f64,
    pub rhs_per_term: f64,
    pub lhs_per_term: f64,
    pub precondition_ok: bool,
    /// `lhs ≤ rhs`, only meaningful when the precondition holds.
    pub holds: Option<bool>,
}

impl BoundReport {
    /// `lhs ≤ rhs` regardless of the precondition.
    pub fn inequality_satisfied(&self) -> bool {
        self.lhs_per_term <= self.rhs_per_term
    }
}

pub fn rhs_per_term(chi: usize, lambda2_abs: f64, beta: f64, kappa: f64, r: usize) -> Result<f64> {
    let cc = bound_constant(chi, lambda2_abs)?;
    let chi_f = chi as f64;
    let prefactor = (8.0 * beta * beta * chi_f.powi(5) * cc / (kappa * lambda2_abs)).sqrt();
    let half = (r as f64 - 1.0) / 2.0;
    Ok(prefactor * lambda2_abs.powf(r as f64 / 2.0) * half.powf((chi_f * chi_f - 1.0) / 2.0))
}

/// Full audit at odd range `r` with the derivative on the middle site.
pub fn verify_bound(psi: &UniformMps, tangent: &TangentTensor, r: usize) -> Result<BoundReport> {
    if r % 2 == 0 || r < 3 {
        return Err(Error::Unsupported(format!("bound audit covers odd r ≥ 3, got {r}")));
    }
    let chi = psi.chi();
    let opts = GeneratorOptions { placement: Some(generator::middle_site(r)), ..Default::default() };
    let bundle = generator::build_generator(psi, tangent, r, &opts, None)?;
    debug_assert_eq!(bundle.alpha, DerivativeWeights::middle(r));
    let lhs = bundle.leakage_per_site.sqrt();
    let lambda2_abs = psi.lambda2_abs();
    if chi == 1 || lambda2_abs <= 0.0 {
        // No correlations: the bound is vacuous and any rhs dominates.
        return Ok(BoundReport {
            r,
            l: (r as f64 - 1.0) / 2.0,
            chi,
            lambda2_abs,
            c_const: f64::NAN,
            kappa: 1.0,
            beta: 0.0,
            epsilon_l: 0.0,
            epsilon_r: 0.0,
            rhs_per_term: f64::INFINITY,
            lhs_per_term: lhs,
            precondition_ok: true,
            holds: Some(true),
        });
    }
    let (canon, y, y_inv) = mps::canonicalize_right(psi)?;
    let dt = tangent.gauge(&y, &y_inv);
    let kappa = mps::left_spectrum(&canon)[0].abs();
    let b = beta(&canon, &dt);
    let l = (r as f64 - 1.0) / 2.0;
    let c_const = bound_constant(chi, lambda2_abs)?;
    let epsilon_l = epsilon(chi, lambda2_abs, l)?;
    let epsilon_r = epsilon(chi, lambda2_abs, r as f64)?;
    let rhs = rhs_per_term(chi, lambda2_abs, b, kappa, r)?;
    let precondition_ok = epsilon_r <= kappa / 2.0;
    Ok(BoundReport {
        r,
        l,
        chi,
        lambda2_abs,
        c_const,
        kappa,
        beta: b,
        epsilon_l,
        epsilon_r,
        rhs_per_term: rhs,
        lhs_per_term: lhs,
        precondition_ok,
        holds: precondition_ok.then_some(lhs <= rhs),
    })
}

/// Smallest range with `ε(r) ≤ κ/2`, searched up to `r_max`.
pub fn precondition_range(chi: usize, lambda2_abs: f64, kappa: f64, r_max: usize) -> Result<Option<usize>> {
    for r in 1..=r_max {
        if epsilon(chi, lambda2_abs, r as f64)? <= kappa / 2.0 {
            return Ok(Some(r));
        }
    }
    Ok(None)
}
