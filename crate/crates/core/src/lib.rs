//! Riesz condenser problems in R^3: kernels, sweeping, energies, the
//! constrained Gauss variational problem and thinness diagnostics.

pub mod balayage;
pub mod error;
pub mod example10;
pub mod energy;
pub mod geometry;
pub mod green;
pub mod kernels;
pub mod nnls;
pub mod numerics;
pub mod pipelines;
pub mod records;
pub mod scenario;
pub mod solver;
pub mod thinness;
pub mod treecode;

pub use error::{Error, Result};
