//! Lattice laboratory for light–matter mean-field dynamics.
//!
//! Two solvers share one discretization: a pseudo-spectral integrator for the
//! effective Maxwell–Schrödinger system `(φ, α)` on a periodic lattice with a
//! truncated photon-mode set, and an exact propagator for the corresponding
//! truncated Pauli–Fierz many-body model in the scaling `ħ = 1`,
//! `μ_N = 1/√N`, `g_N = 1/N`. The [`beta`] module quantifies how well the
//! effective dynamics tracks the microscopic one through condensate,
//! coherence, and energy-variance functionals and their reduced density
//! matrices.

pub mod beta;
pub mod charge;
pub mod coupling;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod ms;
pub mod pf;
pub mod potential;
pub(crate) mod vec3;

pub use charge::{ChargeDistribution, ChargeKind};
pub use coupling::CouplingTable;
pub use error::{CoreError, MsError, PfError};
pub use grid::{build_grid, polarization_basis, DiscretizationConfig, ModeSlot, ModelGrid};
pub use potential::{PairPotential, PotentialKind};

/// Complex double, the amplitude scalar used throughout.
pub type C64 = num_complex::Complex64;
