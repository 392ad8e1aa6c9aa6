//! Torus geometry, Fourier representation and Sobolev norms.

mod datum;
mod fft;
mod field;
mod grid;
pub mod snapshot;

pub use datum::DistributionalDatum;
pub use field::SpectralField;
pub(crate) use field::{ensure_same_grid, map_refined};
pub use grid::{TorusGrid, MAX_DIM};

/// Real Sobolev index `l` of `H^l`; may be negative or fractional.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SobolevIndex(pub f64);

impl SobolevIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for SobolevIndex {
    fn from(l: f64) -> Self {
        Self(l)
    }
}

/// Trapezoid rule on grid nodes; exact for trigonometric polynomials of degree below `n`.
pub fn trapezoid(grid: &TorusGrid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}
