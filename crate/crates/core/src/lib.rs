//! Desk-scale numerical laboratory for the short-path optimization algorithm.
//!
//! The crate simulates the Hamiltonian family `H_s = H_Z - s B (X/N)^K` on
//! small spin systems and checks, numerically and exactly where possible, the
//! spectral, perturbative, random-walk and entropy statements that underpin
//! the algorithm's runtime analysis.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); exact moments use
//! arbitrary-precision rationals. The aliases below fix the scalar to `f64`,
//! which is what the invariants are calibrated against.

pub mod bw;
pub mod config;
pub mod eigensolve;
pub mod entropy;
pub mod error;
pub mod hilbert;
pub mod instance;
pub mod linalg;
pub mod localize;
pub mod reduce;
pub mod sampling;
pub mod scalar;
pub mod shortpath;
pub mod verify;
pub mod walk;

pub use config::Caps;
pub use error::{Error, Result};
pub use hilbert::BasisMode;
pub use instance::{CostTerm, EnergyHistogram, Instance, SpinConfig};
pub use scalar::Scalar;

pub type StateVector64 = hilbert::StateVector<f64>;
pub type StateVector32 = hilbert::StateVector<f32>;
pub type HsParams64 = hilbert::HsParams<f64>;
pub type HsParams32 = hilbert::HsParams<f32>;
pub type SolverConfig64 = eigensolve::SolverConfig<f64>;
pub type SpectralReport64 = eigensolve::SpectralReport<f64>;
pub type PathScan64 = eigensolve::PathScan<f64>;
pub type BwReport64 = bw::BwReport<f64>;
pub type Chain64 = localize::Chain<f64>;
pub type BandChain64 = localize::BandChain<f64>;
pub type LocalizedState64 = localize::LocalizedState<f64>;
