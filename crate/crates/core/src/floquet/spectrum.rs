//! Floquet eigendecomposition, smoothed density of states and level-spacing
//! ratios.

use std::f64::consts::PI;

use serde::Serialize;

use super::propagate::unitarity_defect;
use crate::linalg;
use crate::{CMat, C64, Error, Result};

/// Largest unitarity defect accepted by [`floquet_spectrum`].
pub const UNITARITY_TOL: f64 = 1e-6;

/// Eigenphases `φ_n`, quasi-energies `e_n = i ln φ_n ∈ (−π, π]` (ascending)
/// and eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct FloquetSpectrum {
    pub phases: Vec<C64>,
    pub quasi_energies: Vec<f64>,
    pub vectors: CMat,
}

/// `i ln φ` on the principal branch, mapped into `(−π, π]`.
pub fn quasi_energy(phi: C64) -> f64 {
    let e = -phi.arg();
    if e <= -PI { e + 2.0 * PI } else { e }
}

/// Angle on the unit circle farthest from every candidate eigenphase.
///
/// The eigenvalues of `(U + U†)/2` are `cos e_n`, so `±arccos` of them covers
/// every eigenphase up to the sign ambiguity.
fn free_angle(u: &CMat) -> f64 {
    let herm = (u + u.adjoint()) * C64::new(0.5, 0.0);
    let mut angles: Vec<f64> = herm
        .symmetric_eigenvalues()
        .iter()
        .flat_map(|&x| {
            let a = x.clamp(-1.0, 1.0).acos();
            [a, -a]
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    let mut best = (angles[0] + 2.0 * PI - angles[angles.len() - 1], angles[angles.len() - 1]);
    for w in angles.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    best.1 + best.0 / 2.0
}

/// Eigendecomposition of a unitary through the Hermitian Cayley transform
/// `C = i (1 − V)(1 + V)^{-1}` with `V = −e^{−iθ} U` and `e^{iθ}` chosen away
/// from the spectrum. Degenerate eigenspaces come out orthonormal; the
/// eigenphases are the Rayleigh quotients `⟨v|U|v⟩`.
pub fn floquet_spectrum(u: &CMat) -> Result<FloquetSpectrum> {
    let defect = unitarity_defect(u);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let n = u.nrows();
    let theta = free_angle(u);
    let v = u * -C64::from_polar(1.0, -theta);
    let id = CMat::identity(n, n);
    // (1 − V)(1 + V)^{-1} = ((1 + V)^{-†} (1 − V)†)†.
    let solved = (&id + &v)
        .adjoint()
        .lu()
        .solve(&(&id - &v).adjoint())
        .ok_or_else(|| Error::IllConditioned("Cayley transform is singular".into()))?;
    let cayley = linalg::hermitian_part(&(solved.adjoint() * C64::new(0.0, 1.0)));
    let (_, q) = linalg::eigh(&cayley);
    let phases: Vec<C64> = (0..n)
        .map(|k| {
            let col = q.column(k);
            (col.adjoint() * u * col)[(0, 0)]
        })
        .collect();
    let mut order: Vec<(f64, usize)> = (0..n).map(|k| (quasi_energy(phases[k]), k)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &(_, src)) in order.iter().enumerate() {
        vectors.set_column(dst, &q.column(src));
    }
    Ok(FloquetSpectrum {
        phases: order.iter().map(|&(_, k)| phases[k]).collect(),
        quasi_energies: order.iter().map(|&(e, _)| e).collect(),
        vectors,
    })
}

impl FloquetSpectrum {
    pub fn len(&self) -> usize { self.quasi_energies.len() }
    pub fn is_empty(&self) -> bool { self.quasi_energies.is_empty() }

    /// Largest `||φ_n| − 1|`.
    pub fn modulus_defect(&self) -> f64 {
        self.phases.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Default Gaussian variance of the smoothed density of states.
pub const DEFAULT_SIGMA2: f64 = 0.05;

/// `ρ_σ(ε) = (1/D) Σ_n (2πσ²)^{−1/2} exp(−(ε − e_n)²/2σ²)` on `points`
/// uniform values `ε_k = −π + 2π (k + 1)/points`.
pub fn sdos(energies: &[f64], sigma2: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if !(sigma2 > 0.0) {
        return Err(Error::DomainError(format!("σ² = {sigma2} must be positive")));
    }
    if energies.is_empty() {
        return Err(Error::TooFewLevels { needed: 1, got: 0 });
    }
    let norm = 1.0 / ((2.0 * PI * sigma2).sqrt() * energies.len() as f64);
    Ok((0..points)
        .map(|k| {
            let eps = -PI + 2.0 * PI * (k + 1) as f64 / points as f64;
            let rho = energies.iter().map(|e| (-(eps - e).powi(2) / (2.0 * sigma2)).exp()).sum::<f64>() * norm;
            (eps, rho)
        })
        .collect())
}

/// Standard deviation of `ρ` over the grid divided by its mean.
pub fn relative_std(values: &[(f64, f64)]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.1).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.1 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Reference mean of `r̃` for uncorrelated levels, `2 ln 2 − 1`.
pub fn poisson_mean_ratio() -> f64 {
    2.0 * 2f64.ln() - 1.0
}

/// Reference mean of `r̃` for the orthogonal ensembles (surmise), `4 − 2√3`.
pub fn orthogonal_mean_ratio() -> f64 {
    4.0 - 2.0 * 3f64.sqrt()
}

/// Reference mean of `r̃` for the unitary ensembles (surmise), `2√3/π − 1/2`.
pub fn unitary_mean_ratio() -> f64 {
    2.0 * 3f64.sqrt() / std::f64::consts::PI - 0.5
}

#[derive(Clone, Debug, Serialize)]
pub struct SpacingRatios {
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Spacings below [`DEGENERATE_SPACING`]; ratios touching them are dropped.
    pub degenerate_spacings: usize,
}

pub const DEGENERATE_SPACING: f64 = 1e-12;

/// `r̃_n = min(s_n, s_{n−1}) / max(s_n, s_{n−1})` for sorted levels.
pub fn spectral_ratios(sorted: &[f64]) -> Result<SpacingRatios> {
    if sorted.len() < 3 {
        return Err(Error::TooFewLevels { needed: 3, got: sorted.len() });
    }
    let spacings: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    if spacings.iter().any(|&s| s < -DEGENERATE_SPACING) {
        return Err(Error::DomainError("levels are not sorted".into()));
    }
    let degenerate_spacings = spacings.iter().filter(|&&s| s < DEGENERATE_SPACING).count();
    let ratios: Vec<f64> = spacings
        .windows(2)
        .filter(|w| w[0] >= DEGENERATE_SPACING && w[1] >= DEGENERATE_SPACING)
        .map(|w| w[0].min(w[1]) / w[0].max(w[1]))
        .collect();
    if ratios.is_empty() {
        return Err(Error::TooFewLevels { needed: 3, got: sorted.len() - degenerate_spacings });
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(SpacingRatios { ratios, mean, degenerate_spacings })
}

/// Histogram of `r̃` on `[0, 1]` as `(bin_center, density)`.
pub fn ratio_histogram(ratios: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let mut counts = vec![0usize; bins];
    for &r in ratios {
        let k = ((r * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = ratios.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(k, &n)| ((k as f64 + 0.5) / bins as f64, n as f64 * bins as f64 / total))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn identity_has_zero_quasi_energies() {
        let s = floquet_spectrum(&CMat::identity(4, 4)).unwrap();
        assert!(s.quasi_energies.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn branch_convention() {
        let u = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]));
        let s = floquet_spectrum(&u).unwrap();
        assert!((s.quasi_energies[0] + PI / 2.0).abs() < 1e-14);
        assert!(s.quasi_energies[1].abs() < 1e-14);
        assert!((quasi_energy(c(-1.0, 0.0)) - PI).abs() < 1e-15);
        assert!((quasi_energy(c(-1.0, -0.0)) - PI).abs() < 1e-15);
    }

    #[test]
    fn non_unitary_is_rejected() {
        assert!(matches!(floquet_spectrum(&(CMat::identity(2, 2) * c(2.0, 0.0))), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn single_level_peak() {
        let rho = sdos(&[0.0], 0.05, 1000).unwrap();
        let at_zero = rho.iter().find(|p| p.0.abs() < 1e-12).unwrap().1;
        assert!((at_zero - 1.0 / (2.0 * PI * 0.05).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sdos_integrates_to_one() {
        let levels: Vec<f64> = (0..40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let points = 2000;
        let rho = sdos(&levels, 0.05, points).unwrap();
        let integral: f64 = rho.iter().map(|p| p.1).sum::<f64>() * 2.0 * PI / points as f64;
        assert!((integral - 1.0).abs() < 0.01);
    }

    #[test]
    fn equal_spacing_gives_unit_ratios() {
        let levels: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        let r = spectral_ratios(&levels).unwrap();
        assert!(r.ratios.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_spacings_are_excluded() {
        let r = spectral_ratios(&[0.0, 0.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.degenerate_spacings, 1);
        assert_eq!(r.ratios, vec![1.0, 0.5]);
        assert!(spectral_ratios(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn reference_values() {
        assert!((poisson_mean_ratio() - 0.386_294).abs() < 1e-6);
        assert!((orthogonal_mean_ratio() - 0.535_898).abs() < 1e-6);
    }
}
