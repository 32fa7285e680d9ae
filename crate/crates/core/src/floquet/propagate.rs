//! Time-ordered propagation under a loop of Hermitian generators.
//!
//! Steps use the fourth-order Magnus expansion with two Gauss–Legendre
//! nodes. Each step exponential is taken through a Hermitian
//! eigendecomposition, so every step is unitary to roundoff. The step size is
//! controlled by step doubling: one step of size `h` is compared with two of
//! size `h/2`, and the finer result is kept once the difference is below the
//! absolute tolerance.

use serde::Serialize;

use super::sector::MomentumSector;
use crate::chain;
use crate::generator::{self, GeneratorOptions};
use crate::linalg::{self, c, I};
use crate::pauli::PauliExpansion;
use crate::trajectory::LoopSource;
use crate::{CMat, CVec, Error, Result};

/// Hilbert space in which a translation-invariant drive is integrated.
#[derive(Clone, Debug)]
pub enum Space {
    Full { n: usize, d: usize },
    ZeroMomentum(MomentumSector),
}

impl Space {
    pub fn full(n: usize, d: usize) -> Result<Self> {
        chain::hilbert_dim(d, n, chain::MAX_DENSE_OPERATOR_SITES)?;
        Ok(Space::Full { n, d })
    }

    pub fn zero_momentum(n: usize, d: usize) -> Result<Self> {
        Ok(Space::ZeroMomentum(MomentumSector::zero(n, d)?))
    }

    pub fn n(&self) -> usize {
        match self {
            Space::Full { n, .. } => *n,
            Space::ZeroMomentum(s) => s.n(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Full { n, d } => d.pow(*n as u32),
            Space::ZeroMomentum(s) => s.dim(),
        }
    }

    /// Matrix of `Σ_i shift(h, i)` in this space.
    pub fn hamiltonian(&self, h: &CMat) -> Result<CMat> {
        match self {
            Space::Full { n, d } => Ok(chain::embed_operator(h, *d, *n)?.matrix),
            Space::ZeroMomentum(s) => s.hamiltonian(h),
        }
    }

    /// Coordinates of a full-space vector.
    pub fn coords(&self, v: &CVec) -> CVec {
        match self {
            Space::Full { .. } => v.clone(),
            Space::ZeroMomentum(s) => s.project(v),
        }
    }

    /// Full-space vector from coordinates.
    pub fn lift(&self, v: &CVec) -> CVec {
        match self {
            Space::Full { .. } => v.clone(),
            Space::ZeroMomentum(s) => s.lift(v),
        }
    }
}

/// How the generator density is assembled at each time.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DriveOptions {
    pub optimize_alpha: bool,
    /// Fit `h_r` to the unoptimized range-`(r−1)` density at the same time.
    pub optimize_complement: bool,
}

/// Hermitian range-`r` density along a loop.
pub struct GeneratorDrive<'a> {
    pub source: &'a dyn LoopSource,
    pub r: usize,
    pub options: DriveOptions,
}

impl GeneratorDrive<'_> {
    pub fn density(&self, t: f64) -> Result<CMat> {
        let (psi, tangent) = self.source.state_at(t)?;
        let mut opts = GeneratorOptions { optimize_alpha: self.options.optimize_alpha, ..Default::default() };
        if self.options.optimize_complement && self.r > 1 {
            let prev = generator::build_generator(&psi, &tangent, self.r - 1, &GeneratorOptions::default(), Some(t))?;
            opts.complement_target = Some(PauliExpansion::canonical(&prev.h)?);
        }
        let bundle = generator::build_generator(&psi, &tangent, self.r, &opts, Some(t))?;
        Ok(bundle.h.into_matrix())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PropagatorSettings {
    /// Absolute per-step tolerance on the propagator.
    pub tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        Self { tol: 1e-9, initial_step: 1e-2, min_step: 1e-9, max_steps: 200_000 }
    }
}

/// Propagators at the requested checkpoints.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub times: Vec<f64>,
    pub unitaries: Vec<CMat>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6

fn magnus_step(hamiltonian: &dyn Fn(f64) -> Result<CMat>, t: f64, h: f64) -> Result<CMat> {
    let h1 = hamiltonian(t + h * (0.5 - GAUSS_OFFSET))?;
    let h2 = hamiltonian(t + h * (0.5 + GAUSS_OFFSET))?;
    // K = (h/2)(H1 + H2) − i (√3 h²/12) [H2, H1]; the step is exp(−iK).
    let comm = &h2 * &h1 - &h1 * &h2;
    let k = (&h1 + &h2) * c(h / 2.0, 0.0) - comm * (I * (3f64.sqrt() * h * h / 12.0));
    Ok(linalg::unitary_exp(&linalg::hermitian_part(&k)))
}

/// Integrates `dU/dt = −i H(t) U` from `t0`, recording `U` at each
/// checkpoint (ascending, all ≥ `t0`).
pub fn propagate_with(
    hamiltonian: &dyn Fn(f64) -> Result<CMat>,
    dim: usize,
    t0: f64,
    checkpoints: &[f64],
    settings: &PropagatorSettings,
) -> Result<Propagation> {
    if checkpoints.windows(2).any(|w| w[1] < w[0]) || checkpoints.first().is_some_and(|&t| t < t0) {
        return Err(Error::Config("checkpoints must be ascending and not before the start time".into()));
    }
    let mut u = CMat::identity(dim, dim);
    let mut t = t0;
    let mut h = settings.initial_step;
    let mut out = Propagation { times: Vec::new(), unitaries: Vec::new(), accepted_steps: 0, rejected_steps: 0 };
    for &target in checkpoints {
        while target - t > 1e-14 * target.abs().max(1.0) {
            if out.accepted_steps + out.rejected_steps >= settings.max_steps {
                return Err(Error::ToleranceNotMet { t, step: h, tol: settings.tol });
            }
            let step = h.min(target - t);
            let coarse = magnus_step(hamiltonian, t, step)?;
            let half = magnus_step(hamiltonian, t, step / 2.0)?;
            let fine = magnus_step(hamiltonian, t + step / 2.0, step / 2.0)? * half;
            let err = linalg::frobenius(&(&fine - &coarse)) / 15.0;
            if err <= settings.tol {
                u = fine * u;
                t += step;
                out.accepted_steps += 1;
                let grow = if err > 0.0 { 0.9 * (settings.tol / err).powf(0.2) } else { 2.0 };
                // Only grow from a full step; a step clipped to a checkpoint says nothing.
                if step >= h * 0.999 {
                    h *= grow.clamp(0.3, 2.0);
                }
            } else {
                out.rejected_steps += 1;
                h = step * (0.9 * (settings.tol / err).powf(0.2)).clamp(0.1, 0.9);
                if h < settings.min_step {
                    return Err(Error::ToleranceNotMet { t, step: h, tol: settings.tol });
                }
            }
        }
        out.times.push(target);
        out.unitaries.push(u.clone());
    }
    Ok(out)
}

/// Propagates a translation-invariant drive in `space`.
pub fn propagate(
    drive: &GeneratorDrive<'_>,
    space: &Space,
    checkpoints: &[f64],
    settings: &PropagatorSettings,
) -> Result<Propagation> {
    let ham = |t: f64| -> Result<CMat> { space.hamiltonian(&drive.density(t)?) };
    propagate_with(&ham, space.dim(), 0.0, checkpoints, settings)
}

/// `‖U†U − 𝟙‖_F`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    linalg::frobenius(&(u.adjoint() * u - CMat::identity(u.ncols(), u.ncols())))
}

/// One row of a fidelity trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FidelityPoint {
    pub t: f64,
    /// `|⟨ψ(t)|U(t)|ψ(0)⟩|²`.
    pub fidelity: f64,
    /// `−ln F / N`.
    pub log_fidelity_per_site: f64,
}

/// Normalized MPS state at time `t`, in `space` coordinates.
pub fn loop_state(source: &dyn LoopSource, space: &Space, t: f64) -> Result<CVec> {
    let (psi, _) = source.state_at(t)?;
    let v = chain::mps_state_vector(psi.tensor(), space.n())?.amplitudes;
    Ok(space.coords(&v))
}

/// Fidelity of the driven state with the loop state on a time grid.
pub fn fidelity_trace(
    drive: &GeneratorDrive<'_>,
    space: &Space,
    grid: &[f64],
    settings: &PropagatorSettings,
) -> Result<(Vec<FidelityPoint>, Propagation)> {
    let prop = propagate(drive, space, grid, settings)?;
    let psi0 = loop_state(drive.source, space, 0.0)?;
    let n = space.n() as f64;
    let mut rows = Vec::with_capacity(grid.len());
    for (&t, u) in grid.iter().zip(&prop.unitaries) {
        let target = loop_state(drive.source, space, t)?;
        let fidelity = linalg::inner(&target, &(u * &psi0)).norm_sqr();
        rows.push(FidelityPoint { t, fidelity, log_fidelity_per_site: -fidelity.ln() / n });
    }
    Ok((rows, prop))
}

/// `n + 1` uniform times covering `[0, τ]`.
pub fn uniform_grid(tau: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| tau * k as f64 / n as f64).collect()
}
