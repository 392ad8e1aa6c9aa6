//! Linearization of the MFG system around a solution, with smooth or
//! distributional initial perturbations.

mod coefficients;
mod solver;
mod trace;

pub use coefficients::{freeze_coefficients, Coefficient, FrozenCoefficients};
pub use solver::{solve_linearized, LinearDiagnostics, LinearizedPair, StageDiagnostics};
pub use trace::{negative_norm_trace, NegativeNormTrace};
