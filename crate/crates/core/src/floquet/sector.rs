//! Zero-momentum sector of a periodic chain.
//!
//! Basis vectors are uniform superpositions over translation orbits
//! (necklaces), `|a⟩ = n_a^{−1/2} Σ_{x ∈ orbit(a)} |x⟩`. A translation-invariant
//! Hamiltonian `H = Σ_i shift(h, i)` restricted to the sector has elements
//! `⟨a|H|b⟩ = N ⟨a|h_0|b⟩`, with `h_0` acting on sites `0..r`.

use crate::chain;
use crate::linalg::c;
use crate::{CMat, CVec, Error, Result};

/// Largest chain for which a sector is built.
pub const MAX_SECTOR_SITES: usize = 16;

#[derive(Clone, Debug)]
pub struct MomentumSector {
    n: usize,
    d: usize,
    orbit_of: Vec<u32>,
    orbits: Vec<Vec<usize>>,
}

impl MomentumSector {
    pub fn zero(n: usize, d: usize) -> Result<Self> {
        let full = chain::hilbert_dim(d, n, MAX_SECTOR_SITES)?;
        let mut orbit_of = vec![u32::MAX; full];
        let mut orbits = Vec::new();
        for x in 0..full {
            if orbit_of[x] != u32::MAX {
                continue;
            }
            let id = orbits.len() as u32;
            let mut members = Vec::new();
            let mut y = x;
            loop {
                if orbit_of[y] == id {
                    break;
                }
                orbit_of[y] = id;
                members.push(y);
                y = chain::translate_index(y, d, n);
            }
            members.sort_unstable();
            orbits.push(members);
        }
        Ok(Self { n, d, orbit_of, orbits })
    }

    pub fn n(&self) -> usize { self.n }
    pub fn d(&self) -> usize { self.d }
    pub fn dim(&self) -> usize { self.orbits.len() }
    pub fn full_dim(&self) -> usize { self.orbit_of.len() }

    /// Smallest basis state of every orbit.
    pub fn representatives(&self) -> Vec<usize> {
        self.orbits.iter().map(|o| o[0]).collect()
    }

    /// Sector coordinates `⟨a|v⟩`.
    pub fn project(&self, v: &CVec) -> CVec {
        CVec::from_iterator(
            self.dim(),
            self.orbits.iter().map(|o| o.iter().map(|&x| v[x]).sum::<crate::C64>() / c((o.len() as f64).sqrt(), 0.0)),
        )
    }

    /// Full-space vector `Σ_a c_a |a⟩`.
    pub fn lift(&self, coords: &CVec) -> CVec {
        let mut v = CVec::zeros(self.full_dim());
        for (o, &z) in self.orbits.iter().zip(coords.iter()) {
            let w = z / c((o.len() as f64).sqrt(), 0.0);
            for &x in o {
                v[x] = w;
            }
        }
        v
    }

    /// `full_dim × dim` isometry whose columns are the sector basis.
    pub fn basis_matrix(&self) -> CMat {
        let mut b = CMat::zeros(self.full_dim(), self.dim());
        for (a, o) in self.orbits.iter().enumerate() {
            let w = c(1.0 / (o.len() as f64).sqrt(), 0.0);
            for &x in o {
                b[(x, a)] = w;
            }
        }
        b
    }

    /// `B† U B` for a full-space operator.
    pub fn restrict(&self, u: &CMat) -> Result<CMat> {
        if u.nrows() != self.full_dim() || u.ncols() != self.full_dim() {
            return Err(Error::BasisMismatch(format!("operator of size {} on a {}-dim space", u.nrows(), self.full_dim())));
        }
        let b = self.basis_matrix();
        Ok(b.adjoint() * u * b)
    }

    /// Sector matrix of `Σ_i shift(h, i)`.
    pub fn hamiltonian(&self, h: &CMat) -> Result<CMat> {
        let r = crate::mps::range_of(h.nrows(), self.d)?;
        if r > self.n {
            return Err(Error::DomainError(format!("chain of {} sites shorter than operator range {r}", self.n)));
        }
        let tail = self.d.pow((self.n - r) as u32);
        let local_dim = h.nrows();
        let dim = self.dim();
        let norms: Vec<f64> = self.orbits.iter().map(|o| (o.len() as f64).sqrt()).collect();
        let mut out = CMat::zeros(dim, dim);
        let n = self.n as f64;
        for (b, o) in self.orbits.iter().enumerate() {
            for &x in o {
                let (l, rest) = (x / tail, x % tail);
                for lp in 0..local_dim {
                    let z = h[(lp, l)];
                    if z.re == 0.0 && z.im == 0.0 {
                        continue;
                    }
                    let a = self.orbit_of[lp * tail + rest] as usize;
                    out[(a, b)] += z * (n / (norms[a] * norms[b]));
                }
            }
        }
        Ok(out)
    }
}

/// Number of binary necklaces of length `n`, `(1/n) Σ_{k|n} φ(k) 2^{n/k}`.
pub fn necklace_count(n: usize, d: usize) -> usize {
    fn phi(mut k: usize) -> usize {
        let mut out = k;
        let mut p = 2;
        while p * p <= k {
            if k % p == 0 {
                while k % p == 0 {
                    k /= p;
                }
                out -= out / p;
            }
            p += 1;
        }
        if k > 1 {
            out -= out / k;
        }
        out
    }
    (1..=n).filter(|k| n % k == 0).map(|k| phi(k) * d.pow((n / k) as u32)).sum::<usize>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn sector_dimensions() {
        assert_eq!(MomentumSector::zero(8, 2).unwrap().dim(), 36);
        assert_eq!(MomentumSector::zero(2, 2).unwrap().dim(), 3);
        for n in 1..=12 {
            assert_eq!(MomentumSector::zero(n, 2).unwrap().dim(), necklace_count(n, 2), "N = {n}");
        }
    }

    #[test]
    fn two_site_basis() {
        let s = MomentumSector::zero(2, 2).unwrap();
        let b = s.basis_matrix();
        let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert_eq!(b[(0, 0)], c(1.0, 0.0));
        assert!((b[(1, 1)] - h).norm() < 1e-15 && (b[(2, 1)] - h).norm() < 1e-15);
        assert_eq!(b[(3, 2)], c(1.0, 0.0));
    }

    #[test]
    fn projector_is_idempotent_and_isometric() {
        let s = MomentumSector::zero(6, 2).unwrap();
        let b = s.basis_matrix();
        let iso = b.adjoint() * &b;
        assert!(linalg::frobenius(&(iso - CMat::identity(s.dim(), s.dim()))) < 1e-12);
        let p = &b * b.adjoint();
        assert!(linalg::frobenius(&(&p * &p - &p)) < 1e-10);
    }

    #[test]
    fn sector_hamiltonian_matches_restriction() {
        let n = 6;
        let h = CMat::from_fn(8, 8, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let h = &h + h.adjoint();
        let s = MomentumSector::zero(n, 2).unwrap();
        let full = chain::embed_operator(&h, 2, n).unwrap().matrix;
        let direct = s.restrict(&full).unwrap();
        let fast = s.hamiltonian(&h).unwrap();
        assert!(linalg::frobenius(&(direct - fast)) < 1e-10);
    }

    #[test]
    fn project_and_lift_round_trip() {
        let s = MomentumSector::zero(5, 2).unwrap();
        let coords = CVec::from_fn(s.dim(), |k, _| c(k as f64, 1.0));
        let back = s.project(&s.lift(&coords));
        assert!(linalg::vec_norm(&(back - coords)) < 1e-12);
    }
}
