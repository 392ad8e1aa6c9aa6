//! Hamiltonians, terminal costs and assumption audits.

pub mod audit;
mod fields;
mod hamiltonian;
mod payoff;

pub use audit::{audit_assumptions, AuditConfig, AuditSample};
pub(crate) use fields::NodalState;
pub use fields::{h_fields, ClampCount, HDerivative, CLAMP_FLAG_FRACTION};
pub use hamiltonian::{BuiltinHamiltonian, Hamiltonian, DEFAULT_DENSITY_FLOOR};
pub use payoff::{DensityTransform, FixedCost, KernelSymbol, PayoffSpec};
