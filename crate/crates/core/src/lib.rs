//! Pseudo-spectral laboratory for mean field games with local, non-separable
//! Hamiltonians on the flat torus: the forward–backward MFG system, its
//! linearization, the measure-derivative kernel of the master function and the
//! studies that measure their quantitative estimates.

pub mod config;
pub mod experiments;
pub mod error;
pub mod linearized;
pub mod master;
pub mod mfg;
pub mod model;
pub mod report;
pub mod sampling;
pub mod spectral;

pub use config::{PicardConfig, SolverConfig};
pub use error::{Error, Result};
