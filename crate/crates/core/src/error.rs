use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the solvers and their supporting numerics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected} samples, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("nonlinearity returned {value} at refined node {node} for inputs {inputs:?}")]
    NonlinearityDomain {
        node: usize,
        inputs: Vec<f64>,
        value: f64,
    },

    #[error("density sample {value} at refined node {node} is outside the Hamiltonian domain")]
    DensityDomain { node: usize, value: f64 },

    #[error("non-finite coefficients at time index {step}")]
    BlowUp { step: usize },

    #[error("{0}")]
    NonConvergence(DefectHistory),

    #[error("initial density is at H^s distance {distance:.6} from the uniform density, radius is {radius}")]
    OutsideBall { distance: f64, radius: f64 },

    #[error("initial density has mass {mass}, expected 1")]
    Mass { mass: f64 },

    #[error("audit corpus entry {index} has norm {norm:.6} above radius {radius}")]
    AuditDomain { index: usize, norm: f64, radius: f64 },

    #[error("kernel extraction failed for probes {failed:?}: {first}")]
    PartialKernel { failed: Vec<usize>, first: Box<Error> },

    #[error("operation needs the full probe grid")]
    UnsupportedGrid,

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Defect sequence of a Picard loop that ran out of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectHistory {
    pub defects: Vec<f64>,
    pub tolerance: f64,
}

impl fmt::Display for DefectHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.defects.last().copied().unwrap_or(f64::NAN);
        write!(
            f,
            "Picard iteration stalled after {} sweeps (last defect {last:.3e}, tolerance {:.3e}); the horizon is probably too long",
            self.defects.len(),
            self.tolerance
        )
    }
}
