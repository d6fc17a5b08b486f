//! Gauss variational problems, capacities, equilibrium and condenser measures.

pub mod capacity;
pub mod certificate;
pub mod condenser;
pub mod gauss;
pub mod qp;

pub use capacity::{capacity, green_capacity, green_equilibrium, CapacityResult, GreenEquilibrium};
pub use certificate::CertificateReport;
pub use condenser::{condenser_measure, solve_condenser, support_analysis, unsolvability_demo, CondenserSolution};
pub use gauss::{determinism_check, solve_gauss, ConstraintSpec, ExternalField, GaussProblem, GaussSolution};
pub use qp::{QpSettings, QpStart};
