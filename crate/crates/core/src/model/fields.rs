use super::hamiltonian::Hamiltonian;
use crate::error::{Error, Result};
use crate::spectral::{ensure_same_grid, map_refined, SpectralField, TorusGrid};

/// Fraction of clamped nodes above which a run is flagged.
pub const CLAMP_FLAG_FRACTION: f64 = 1e-3;

/// Which composed field [`h_fields`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HDerivative {
    /// `H`, one field.
    Value,
    /// `D_pH`, `d` fields.
    GradP,
    /// `∂_qH`, one field.
    DQ,
    /// `D²_{pp}H`, `d²` fields in row-major order.
    HessPP,
    /// `D_p∂_qH`, `d` fields.
    CrossPQ,
}

/// Counts density samples raised to the floor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClampCount {
    pub clamped: usize,
    pub total: usize,
}

impl ClampCount {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clamped as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: ClampCount) {
        self.clamped += other.clamped;
        self.total += other.total;
    }

    pub fn flagged(&self) -> bool {
        self.fraction() > CLAMP_FLAG_FRACTION
    }
}

/// Refined-grid samples of `∇u` and `m` at one time, with the clamped density.
#[derive(Clone, Debug)]
pub(crate) struct NodalState {
    pub grid: TorusGrid,
    pub grad: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub clamp: ClampCount,
}

impl NodalState {
    pub fn from_gradient(
        ham: &dyn Hamiltonian,
        u_grad: &[SpectralField],
        m: &SpectralField,
    ) -> Result<Self> {
        let grid = m.grid().clone();
        if u_grad.len() != grid.dim() {
            return Err(Error::Shape {
                expected: grid.dim(),
                actual: u_grad.len(),
            });
        }
        for g in u_grad {
            ensure_same_grid(g, m)?;
        }
        let grad = u_grad.iter().map(|g| g.to_refined()).collect();
        let m = m.to_refined();
        let floor = ham.density_floor();
        let mut clamp = ClampCount {
            clamped: 0,
            total: m.len(),
        };
        let mut q = Vec::with_capacity(m.len());
        for (node, &v) in m.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::DensityDomain { node, value: v });
            }
            if v < floor {
                clamp.clamped += 1;
                q.push(floor);
            } else {
                q.push(v);
            }
        }
        Ok(Self {
            grid,
            grad,
            m,
            q,
            clamp,
        })
    }

    pub fn new(ham: &dyn Hamiltonian, u: &SpectralField, m: &SpectralField) -> Result<Self> {
        Self::from_gradient(ham, &u.gradient(), m)
    }

    /// Applies `f(x, p, q, m, out)` at every refined node.
    pub fn map(
        &self,
        outputs: usize,
        f: impl Fn(&[f64], &[f64], f64, f64, &mut [f64]),
    ) -> Result<Vec<Vec<f64>>> {
        let d = self.grid.dim();
        let mut samples: Vec<Vec<f64>> = self.grad.clone();
        samples.push(self.m.clone());
        samples.push(self.q.clone());
        map_refined(&self.grid, &samples, outputs, |inputs, x, out| {
            f(x, &inputs[..d], inputs[d + 1], inputs[d], out)
        })
    }
}

/// Composes the selected derivative of `H` with `(∇u, m)` by dealiased pointwise evaluation.
///
/// Densities below the Hamiltonian's floor are raised to it; the returned
/// [`ClampCount`] records how many refined nodes were affected.
pub fn h_fields(
    ham: &dyn Hamiltonian,
    t: f64,
    u_grad: &[SpectralField],
    m: &SpectralField,
    which: HDerivative,
) -> Result<(Vec<SpectralField>, ClampCount)> {
    let state = NodalState::from_gradient(ham, u_grad, m)?;
    let d = state.grid.dim();
    let values = match which {
        HDerivative::Value => state.map(1, |x, p, q, _, out| out[0] = ham.value(t, x, p, q))?,
        HDerivative::GradP => state.map(d, |x, p, q, _, out| ham.grad_p(t, x, p, q, out))?,
        HDerivative::DQ => state.map(1, |x, p, q, _, out| out[0] = ham.d_q(t, x, p, q))?,
        HDerivative::HessPP => state.map(d * d, |x, p, q, _, out| ham.hess_pp(t, x, p, q, out))?,
        HDerivative::CrossPQ => state.map(d, |x, p, q, _, out| ham.cross_pq(t, x, p, q, out))?,
    };
    let fields = values
        .iter()
        .map(|v| SpectralField::from_refined(&state.grid, v))
        .collect::<Result<Vec<_>>>()?;
    Ok((fields, state.clamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinHamiltonian;
    use std::f64::consts::PI;

    #[test]
    fn transcendental_vanishes_at_zero_gradient() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = SpectralField::zeros(&g);
        let m = SpectralField::constant(&g, 1.0 / (2.0 * PI));
        let (h, clamp) = h_fields(
            &BuiltinHamiltonian::Transcendental,
            0.0,
            &u.gradient(),
            &m,
            HDerivative::Value,
        )
        .unwrap();
        assert!(h[0].is_zero());
        assert_eq!(clamp.clamped, 0);
    }

    #[test]
    fn nonseparable_drift_at_rest() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = SpectralField::zeros(&g);
        let m = SpectralField::from_fn(&g, |x| 0.2 + 0.05 * x[0].cos());
        let (b, _) = h_fields(
            &BuiltinHamiltonian::NonSeparable { coupling: 1.0 },
            0.0,
            &u.gradient(),
            &m,
            HDerivative::GradP,
        )
        .unwrap();
        assert!((&b[0] - &m).sobolev_norm(0.0) < 1e-15);
    }

    #[test]
    fn clamps_negative_density() {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = SpectralField::zeros(&g);
        let m = SpectralField::from_fn(&g, |x| x[0].cos());
        let (_, clamp) = h_fields(
            &BuiltinHamiltonian::Separable,
            0.0,
            &u.gradient(),
            &m,
            HDerivative::Value,
        )
        .unwrap();
        assert!(clamp.clamped > 0 && clamp.flagged());
        assert_eq!(clamp.total, 32);
    }
}
