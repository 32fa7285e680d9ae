//! Per-eigenstate overlaps, half-chain entanglement and magnetizations.

use serde::Serialize;

use super::propagate::Space;
use super::spectrum::FloquetSpectrum;
use crate::chain;
use crate::linalg::{self, c};
use crate::pauli::pauli_matrix;
use crate::{CMat, CVec};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EigenstateRow {
    pub n: usize,
    pub quasi_energy: f64,
    /// `|⟨Φ_n|ψ(0)⟩|²`.
    pub overlap: f64,
    /// Half-chain von Neumann entropy, left block of `⌊N/2⌋` sites.
    pub entropy: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

/// `−tr ρ_A ln ρ_A` for the left `cut` sites of a normalized state.
pub fn half_chain_entropy(v: &CVec, d: usize, n: usize, cut: usize) -> f64 {
    let right = d.pow((n - cut) as u32);
    let left = d.pow(cut as u32);
    let m = CMat::from_fn(left, right, |a, b| v[a * right + b]);
    linalg::singular_values(&m)
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum()
}

/// `⟨v| Σ_i σ^α_i |v⟩ / N` for `α = x, y, z`.
pub fn magnetizations(v: &CVec, n: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let op = pauli_matrix(k + 1);
        let mut acc = 0.0;
        for site in 0..n {
            acc += linalg::inner(v, &chain::site_operator_apply(&op, site, v, 2, n)).re;
        }
        *slot = acc / n as f64;
    }
    out
}

/// Eigenphases closer than this are treated as one eigenspace.
pub const DEGENERATE_PHASE: f64 = 1e-8;

/// Groups of eigenvector indices sharing an eigenphase, assuming phases are
/// sorted by quasi-energy; the groups at `±π` are merged.
fn degenerate_groups(spec: &FloquetSpectrum) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..spec.len() {
        match groups.last_mut() {
            Some(g) if (spec.phases[k] - spec.phases[*g.last().expect("non-empty")]).norm() < DEGENERATE_PHASE => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    if groups.len() > 1 {
        let (first, last) = (groups[0][0], *groups[groups.len() - 1].last().expect("non-empty"));
        if (spec.phases[first] - spec.phases[last]).norm() < DEGENERATE_PHASE {
            let tail = groups.pop().expect("checked length");
            groups[0].extend(tail);
        }
    }
    groups
}

/// Eigenvectors with every degenerate eigenspace rotated so that its first
/// vector is the normalized projection of `psi0`; overlaps then measure the
/// weight of `psi0` in each eigenspace instead of an arbitrary basis choice.
pub fn aligned_eigenvectors(spec: &FloquetSpectrum, psi0: &CVec) -> CMat {
    let mut out = spec.vectors.clone();
    for group in degenerate_groups(spec).into_iter().filter(|g| g.len() > 1) {
        let block = CMat::from_columns(&group.iter().map(|&k| spec.vectors.column(k)).collect::<Vec<_>>());
        let proj = &block * (block.adjoint() * psi0);
        let pn = linalg::vec_norm(&proj);
        if pn < 1e-14 {
            continue;
        }
        let mut basis: Vec<CVec> = vec![proj / c(pn, 0.0)];
        for col in block.column_iter() {
            if basis.len() == group.len() {
                break;
            }
            let mut v = col.into_owned();
            for b in &basis {
                v -= b * linalg::inner(b, &v);
            }
            let vn = linalg::vec_norm(&v);
            if vn > 1e-8 {
                basis.push(v / c(vn, 0.0));
            }
        }
        for (&k, b) in group.iter().zip(&basis) {
            out.set_column(k, b);
        }
    }
    out
}

/// Diagnostics for every eigenstate; `psi0` is given in `space` coordinates.
pub fn eigenstate_diagnostics(spec: &FloquetSpectrum, psi0: &CVec, space: &Space) -> Vec<EigenstateRow> {
    let n = space.n();
    let cut = n / 2;
    let vectors = aligned_eigenvectors(spec, psi0);
    (0..spec.len())
        .map(|k| {
            let phi = vectors.column(k).into_owned();
            let overlap = linalg::inner(&phi, psi0).norm_sqr();
            let full = space.lift(&phi);
            let norm = linalg::vec_norm(&full);
            let full = full / c(norm, 0.0);
            let [mx, my, mz] = magnetizations(&full, n);
            EigenstateRow {
                n: k,
                quasi_energy: spec.quasi_energies[k],
                overlap,
                entropy: half_chain_entropy(&full, 2, n, cut),
                mx,
                my,
                mz,
            }
        })
        .collect()
}

/// Summary of the overlap distribution.
#[derive(Clone, Debug, Serialize)]
pub struct ScarSummary {
    /// Index of the largest overlap.
    pub special: usize,
    pub special_overlap: f64,
    pub special_entropy: f64,
    pub median_overlap: f64,
    pub mean_entropy: f64,
    /// Eigenstates whose overlap is at least `factor` times the median.
    pub flagged: Vec<usize>,
    pub factor: f64,
    pub overlap_sum: f64,
}

pub fn scar_summary(rows: &[EigenstateRow], factor: f64) -> ScarSummary {
    let mut overlaps: Vec<f64> = rows.iter().map(|r| r.overlap).collect();
    overlaps.sort_by(f64::total_cmp);
    let m = overlaps.len();
    let median = if m % 2 == 1 { overlaps[m / 2] } else { 0.5 * (overlaps[m / 2 - 1] + overlaps[m / 2]) };
    let special = rows.iter().max_by(|a, b| a.overlap.total_cmp(&b.overlap)).expect("non-empty spectrum");
    ScarSummary {
        special: special.n,
        special_overlap: special.overlap,
        special_entropy: special.entropy,
        median_overlap: median,
        mean_entropy: rows.iter().map(|r| r.entropy).sum::<f64>() / m as f64,
        flagged: rows.iter().filter(|r| r.overlap >= factor * median).map(|r| r.n).collect(),
        factor,
        overlap_sum: overlaps.iter().sum(),
    }
}
