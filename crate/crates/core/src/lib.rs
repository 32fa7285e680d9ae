//! Tangent-space generators for uniform matrix product states.
//!
//! The crate builds, for a translation-invariant MPS `|ψ(A)⟩` and a tangent
//! direction `∂A`, a range-`r` local density `o` whose translation sum drives
//! the state exactly, `−i Σ_i o_i |ψ⟩ = ∂_t|ψ⟩`. Its Hermitian part
//! `h = o + o†` drives the state with a leakage that decays exponentially in
//! `r`. On top of this sit the free-parameter optimizations, a numerical audit
//! of the leakage bound, periodic parameter loops, and a finite-size Floquet
//! laboratory that drives a closed loop with exact diagonalization.
//!
//! Module map:
//!
//! - [`mps`]: site tensors, transfer matrices, fixed points, block maps and
//!   left-inverses.
//! - [`generator`]: exact non-Hermitian generators, hermitization, leakage,
//!   derivative-weight and complement-space optimization.
//! - [`pauli`]: canonical Pauli expansions of spin-½ densities.
//! - [`bound`]: evaluation of every ingredient of the leakage bound.
//! - [`trajectory`]: closed loops in the four-angle tensor manifold.
//! - [`chain`]: dense periodic-chain states and operator embeddings.
//! - [`floquet`]: propagation, Floquet spectra and eigenstate diagnostics.
//! - [`harness`]: config-driven experiment drivers behind the CLI.

pub mod bound;
pub mod chain;
pub mod error;
pub mod floquet;
pub mod generator;
pub mod harness;
pub mod linalg;
pub mod mps;
pub mod pauli;
pub mod trajectory;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector used throughout the crate.
pub type CVec = nalgebra::DVector<C64>;
