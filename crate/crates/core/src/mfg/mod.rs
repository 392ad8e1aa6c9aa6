//! Forward–backward MFG system: Lawson–Euler sweeps and Picard coupling.

mod path;
mod solver;
mod time;

pub use path::{read_path, write_path, PathPair, PATH_MAGIC, PATH_VERSION};
pub(crate) use path::mean_drift;
pub use solver::{
    check_initial_density, fp_forward_sweep, heat_propagate, hjb_backward_sweep, solve_mfg,
    SolveDiagnostics,
};
pub(crate) use solver::{drift_flux, fp_step, hamiltonian_field};
pub use time::TimeGrid;
