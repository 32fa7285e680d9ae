//! Finite-size Floquet laboratory.
//!
//! A Hermitian generator density is embedded on a periodic chain of `N`
//! sites, the loop is integrated over one period to give the Floquet unitary
//! `U_F`, and its eigenstates are characterized by overlap with the initial
//! MPS, half-chain entanglement and magnetization. Level statistics are taken
//! inside the zero-momentum sector, which also contains every
//! translation-invariant MPS.

pub mod diagnostics;
pub mod propagate;
pub mod sector;
pub mod spectrum;

pub use diagnostics::{eigenstate_diagnostics, scar_summary, EigenstateRow, ScarSummary};
pub use propagate::{
    fidelity_trace, propagate, propagate_with, uniform_grid, unitarity_defect, DriveOptions, FidelityPoint,
    GeneratorDrive, Propagation, PropagatorSettings, Space,
};
pub use sector::{necklace_count, MomentumSector};
pub use spectrum::{floquet_spectrum, sdos, spectral_ratios, FloquetSpectrum, SpacingRatios};
