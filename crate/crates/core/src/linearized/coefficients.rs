use rayon::prelude::*;

use crate::error::Result;
use crate::mfg::{PathPair, TimeGrid};
use crate::model::{ClampCount, Hamiltonian, NodalState};
use crate::spectral::{SpectralField, TorusGrid};

/// Coefficient families of the linearized system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coefficient {
    /// `D_pH`, `d` components.
    Drift,
    /// `∂_qH`.
    Source,
    /// `m D²_{pp}H`, `d²` components, row-major.
    Diffusion,
    /// `m D_p∂_qH`, `d` components.
    Cross,
}

#[derive(Clone, Debug)]
pub(crate) struct NodeCoefficients {
    pub drift: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    pub diffusion: Vec<Vec<f64>>,
    pub cross: Vec<Vec<f64>>,
}

/// Linearization coefficients composed on a base solution, held as samples on
/// the refined grid at every time node.
///
/// Keeping nodal samples (rather than truncated fields) makes the linear scheme
/// the exact derivative of the discrete nonlinear one.
#[derive(Clone, Debug)]
pub struct FrozenCoefficients {
    pub(crate) grid: TorusGrid,
    pub(crate) time_grid: TimeGrid,
    pub(crate) nodes: Vec<NodeCoefficients>,
    pub(crate) clamp: ClampCount,
}

impl FrozenCoefficients {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn clamp(&self) -> ClampCount {
        self.clamp
    }

    /// Truncated spectral representation of one coefficient family at node `n`.
    pub fn field(&self, n: usize, which: Coefficient) -> Result<Vec<SpectralField>> {
        let node = &self.nodes[n];
        let samples: Vec<&Vec<f64>> = match which {
            Coefficient::Drift => node.drift.iter().collect(),
            Coefficient::Source => vec![&node.source],
            Coefficient::Diffusion => node.diffusion.iter().collect(),
            Coefficient::Cross => node.cross.iter().collect(),
        };
        samples
            .into_iter()
            .map(|s| SpectralField::from_refined(&self.grid, s))
            .collect()
    }

    /// Whether every sample of a family is exactly zero at every node.
    pub fn vanishes(&self, which: Coefficient) -> bool {
        self.nodes.iter().all(|node| {
            let all_zero = |v: &Vec<f64>| v.iter().all(|&x| x == 0.0);
            match which {
                Coefficient::Drift => node.drift.iter().all(all_zero),
                Coefficient::Source => all_zero(&node.source),
                Coefficient::Diffusion => node.diffusion.iter().all(all_zero),
                Coefficient::Cross => node.cross.iter().all(all_zero),
            }
        })
    }
}

/// Composes `D_pH`, `∂_qH`, `m D²_{pp}H` and `m D_p∂_qH` on `(∇u, m)` at every node.
pub fn freeze_coefficients(ham: &dyn Hamiltonian, base: &PathPair) -> Result<FrozenCoefficients> {
    let tg = base.time_grid;
    let grid = base.m_path[0].grid().clone();
    let d = grid.dim();
    let nodes: Vec<(NodeCoefficients, ClampCount)> = (0..tg.len())
        .into_par_iter()
        .map(|n| {
            let t = tg.time(n);
            let state = NodalState::new(ham, &base.u_path[n], &base.m_path[n])?;
            let width = d + 1 + d * d + d;
            let mut all = state.map(width, |x, p, q, mv, out| {
                let (b, rest) = out.split_at_mut(d);
                ham.grad_p(t, x, p, q, b);
                rest[0] = ham.d_q(t, x, p, q);
                let (hess, cross) = rest[1..].split_at_mut(d * d);
                ham.hess_pp(t, x, p, q, hess);
                ham.cross_pq(t, x, p, q, cross);
                for v in hess.iter_mut().chain(cross.iter_mut()) {
                    *v *= mv;
                }
            })?;
            let cross = all.split_off(d + 1 + d * d);
            let diffusion = all.split_off(d + 1);
            let source = all.pop().expect("source column");
            Ok((
                NodeCoefficients {
                    drift: all,
                    source,
                    diffusion,
                    cross,
                },
                state.clamp,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut clamp = ClampCount::default();
    let nodes = nodes
        .into_iter()
        .map(|(c, k)| {
            clamp.merge(k);
            c
        })
        .collect();
    Ok(FrozenCoefficients {
        grid,
        time_grid: tg,
        nodes,
        clamp,
    })
}
