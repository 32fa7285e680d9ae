//! Restricted complement-space freedom.
//!
//! Adding `Σ_{x,y} C_{xy} |x⟩⟨y|` with both `x` and `y` orthogonal to every
//! MPS block leaves `o|ψ⟩` and `o†|ψ⟩` untouched, so exactness and leakage
//! are unchanged. Only the Hermitian part `S = C + C†` reaches `h = o + o†`,
//! which makes the convergence fit a linear least-squares problem in the
//! real coordinates of `S`.

use nalgebra::{DMatrix, DVector};

use super::{hermitize, LocalOperator};
use crate::linalg::{self, c, I};
use crate::mps::{self, UniformMps};
use crate::pauli::{self, PauliExpansion};
use crate::{CMat, Error, Result};

/// Orthonormal basis of the orthogonal complement of the MPS block image.
#[derive(Clone, Debug)]
pub struct ComplementBasis {
    /// `d^r × (d^r − χ²)` with orthonormal columns.
    pub vectors: CMat,
    pub r: usize,
    pub d: usize,
}

impl ComplementBasis {
    pub fn dim(&self) -> usize { self.vectors.ncols() }
}

pub fn complement_basis(psi: &UniformMps, r: usize) -> Result<ComplementBasis> {
    let block = mps::block_map(psi.tensor(), r)?;
    // Certifies injectivity and conditioning.
    mps::left_inverse_of(&block)?;
    Ok(ComplementBasis { vectors: linalg::column_space_complement(&block.matrix), r, d: psi.d() })
}

/// `o + B C B†`.
pub fn add_complement_term(o: &LocalOperator, basis: &ComplementBasis, coeffs: &CMat) -> Result<LocalOperator> {
    let m = basis.dim();
    if coeffs.nrows() != m || coeffs.ncols() != m {
        return Err(Error::BasisMismatch(format!(
            "coefficient matrix {}×{} for complement of dimension {m}",
            coeffs.nrows(),
            coeffs.ncols()
        )));
    }
    if o.matrix().nrows() != basis.vectors.nrows() {
        return Err(Error::BasisMismatch(format!(
            "operator dimension {} vs complement vectors of length {}",
            o.matrix().nrows(),
            basis.vectors.nrows()
        )));
    }
    if m == 0 {
        return Ok(o.clone());
    }
    let extra = &basis.vectors * coeffs * basis.vectors.adjoint();
    LocalOperator::new(o.matrix() + extra, o.d())
}

/// Result of fitting `h_r` to a shorter-range density.
#[derive(Clone, Debug)]
pub struct ComplementFit {
    /// Optimal coefficients; Hermitian by construction.
    pub coeffs: CMat,
    pub o: LocalOperator,
    pub h: LocalOperator,
    pub distance_before: f64,
    pub distance_after: f64,
}

/// Hermitian `m × m` basis matrices, orthonormal in the Frobenius product.
fn hermitian_basis(m: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(m * m);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..m {
        let mut e = CMat::zeros(m, m);
        e[(j, j)] = c(1.0, 0.0);
        out.push(e);
    }
    for j in 0..m {
        for k in (j + 1)..m {
            let mut sym = CMat::zeros(m, m);
            sym[(j, k)] = c(s, 0.0);
            sym[(k, j)] = c(s, 0.0);
            out.push(sym);
            let mut asym = CMat::zeros(m, m);
            asym[(j, k)] = -I * s;
            asym[(k, j)] = I * s;
            out.push(asym);
        }
    }
    out
}

/// Least-squares fit of `canonical(hermitize(o + B C B†))` to `target`.
///
/// The identity component is not fitted, matching
/// [`pauli::operator_distance`].
pub fn optimize_complement(target: &PauliExpansion, o: &LocalOperator, basis: &ComplementBasis) -> Result<ComplementFit> {
    if o.d() != 2 {
        return Err(Error::Unsupported("complement fit uses the Pauli basis and needs d = 2".into()));
    }
    if o.matrix().nrows() != basis.vectors.nrows() {
        return Err(Error::BasisMismatch("operator and complement basis ranges differ".into()));
    }
    let h0 = hermitize(o);
    let start = PauliExpansion::canonical(&h0)?;
    let distance_before = pauli::operator_distance(target, &start);
    let m = basis.dim();
    if m == 0 {
        return Ok(ComplementFit {
            coeffs: CMat::zeros(0, 0),
            o: o.clone(),
            h: h0,
            distance_before,
            distance_after: distance_before,
        });
    }
    let r = o.range().max(target.max_support());
    let keys = pauli::canonical_labels(r);
    let herm = hermitian_basis(m);
    let mut jac = DMatrix::<f64>::zeros(keys.len(), herm.len());
    for (col, e) in herm.iter().enumerate() {
        let term = &basis.vectors * e * basis.vectors.adjoint();
        let exp = PauliExpansion::from_matrix(&term, 2)?;
        for (row, v) in exp.vector(&keys).into_iter().enumerate() {
            jac[(row, col)] = v;
        }
    }
    let residual = DVector::from_vec(target.vector(&keys)) - DVector::from_vec(start.vector(&keys));
    let params = linalg::lstsq_real(&jac, &residual, 1e-12);
    let mut s = CMat::zeros(m, m);
    for (p, e) in params.iter().zip(&herm) {
        s += e * c(*p, 0.0);
    }
    // h picks up B (C + C†) B†; C = S/2 keeps the added term Hermitian.
    let coeffs = s * c(0.5, 0.0);
    let o_new = add_complement_term(o, basis, &coeffs)?;
    let h_new = hermitize(&o_new);
    let distance_after = pauli::operator_distance(target, &PauliExpansion::canonical(&h_new)?);
    if distance_after > distance_before {
        // Roundoff can only matter when nothing is gained; keep the start.
        return Ok(ComplementFit { coeffs: CMat::zeros(m, m), o: o.clone(), h: h0, distance_before, distance_after: distance_before });
    }
    Ok(ComplementFit { coeffs, o: o_new, h: h_new, distance_before, distance_after })
}
