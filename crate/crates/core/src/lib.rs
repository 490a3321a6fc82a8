//! Pseudo-spectral tools for k-Hessian equations on a periodic box:
//! spectral multipliers, Green's kernels, the k-Hessian and its Newton
//! tensor, harmonic-analysis estimators, a Picard solver and a
//! finite-dimensional Schauder demonstrator.

pub mod analysis;
pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod kernels;
pub mod khessian;
pub mod scalar;
pub mod solver;
pub mod spectral_ops;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RealField64 = grid::RealField<f64>;
pub type RealField32 = grid::RealField<f32>;
pub type SpectralField64 = grid::SpectralField<f64>;
pub type SpectralField32 = grid::SpectralField<f32>;
pub type SymmetricMatrixField64 = khessian::SymmetricMatrixField<f64>;
pub type SymmetricMatrixField32 = khessian::SymmetricMatrixField<f32>;
pub type SolverTrace64 = solver::SolverTrace<f64>;
pub type SolverTrace32 = solver::SolverTrace<f32>;
pub type WeakStarMetric64 = fixedpoint::WeakStarMetric<f64>;
pub type NetCover64 = fixedpoint::NetCover<f64>;
