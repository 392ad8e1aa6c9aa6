use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Initial data for the linearized system, possibly a distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionalDatum {
    /// `δ_y`, unit mass at `y`.
    DiracAt(Vec<f64>),
    /// `∂_{y_axis} δ_y`, zero mass.
    DiracGradientAt(Vec<f64>, usize),
    /// Smooth zero-mean density perturbation.
    ZeroMeanField(SpectralField),
}

impl DistributionalDatum {
    /// Exact truncated Fourier representation on `grid`.
    ///
    /// `δ_y` has `f̂(k) = (2π)^{-d} e^{-ik·y}` on every retained mode and its
    /// derivative multiplies this by `i k_axis`.
    pub fn synthesize(&self, grid: &TorusGrid) -> Result<SpectralField> {
        match self {
            Self::DiracAt(y) => dirac(grid, y),
            Self::DiracGradientAt(y, axis) => {
                if *axis >= grid.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "axis {axis} out of range for dimension {}",
                        grid.dim()
                    )));
                }
                Ok(dirac(grid, y)?.partial(*axis))
            }
            Self::ZeroMeanField(f) => {
                if f.grid().dim() != grid.dim() {
                    return Err(Error::GridMismatch);
                }
                Ok(f.resample(grid)?.project_zero_mean())
            }
        }
    }

    /// Total mass of the datum.
    pub fn mass(&self) -> f64 {
        match self {
            Self::DiracAt(_) => 1.0,
            _ => 0.0,
        }
    }
}

fn dirac(grid: &TorusGrid, y: &[f64]) -> Result<SpectralField> {
    if y.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "point has {} coordinates on a {}-dimensional torus",
            y.len(),
            grid.dim()
        )));
    }
    let amp = grid.uniform_density();
    let coeffs = (0..grid.len())
        .map(|i| {
            let phase: f64 = grid.wavevector(i).iter().zip(y).map(|(k, y)| k * y).sum();
            Complex64::from_polar(amp, -phase)
        })
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dirac_at_origin_is_flat() {
        let g = TorusGrid::new(1, 16).unwrap();
        let d = DistributionalDatum::DiracAt(vec![0.0]).synthesize(&g).unwrap();
        for k in -7..8 {
            assert!((d.coeff(&[k]) - Complex64::new(1.0 / (2.0 * PI), 0.0)).norm() < 1e-16);
        }
        assert!(d.coeff(&[-8]).norm() == 0.0);
        assert!((d.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirac_gradient_has_zero_mass() {
        let g = TorusGrid::new(2, 8).unwrap();
        let d = DistributionalDatum::DiracGradientAt(vec![0.0, 1.0], 0)
            .synthesize(&g)
            .unwrap();
        assert_eq!(d.mean(), 0.0);
        assert!(d.is_hermitian(1e-15));
        assert_eq!(DistributionalDatum::DiracGradientAt(vec![0.0, 1.0], 0).mass(), 0.0);
    }

    #[test]
    fn dirac_sifts_band_limited_functions() {
        // ∫ δ_y f = f(y) for trig polynomials below the cutoff
        let g = TorusGrid::new(1, 32).unwrap();
        let f = SpectralField::from_fn(&g, |x| (2.0 * x[0]).cos() + 0.3 * (5.0 * x[0]).sin());
        let y = 0.77;
        let d = DistributionalDatum::DiracAt(vec![y]).synthesize(&g).unwrap();
        let expected = (2.0 * y).cos() + 0.3 * (5.0 * y).sin();
        assert!((d.integrate_product(&f) - expected).abs() < 1e-13);
    }
}
