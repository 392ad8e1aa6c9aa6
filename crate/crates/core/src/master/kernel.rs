//! Measure-derivative kernel `K(x, y) = (δU/δm)(t0, x, m0)(y)` read off from Dirac probes.
//!
//! Serialized as the magic `MFGK`, a version byte, the dimension byte, `n` and
//! the probe count as `u32` LE, the `x`-grid × probe matrix as row-major `f64`
//! LE, then a trailer with `t0`, the probe coordinates and the `m0` snapshot.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linearized::{freeze_coefficients, solve_linearized, FrozenCoefficients};
use crate::mfg::{solve_mfg, PathPair, TimeGrid};
use crate::model::{Hamiltonian, PayoffSpec};
use crate::spectral::snapshot::{read_f64, read_field, read_u32, write_field};
use crate::spectral::{DistributionalDatum, SpectralField, TorusGrid};

pub const KERNEL_MAGIC: &[u8; 4] = b"MFGK";
pub const KERNEL_VERSION: u8 = 1;

/// Where the kernel is probed.
#[derive(Clone, Debug, PartialEq)]
pub enum Probes {
    /// Every node of the spatial grid, in storage order.
    FullGrid,
    Points(Vec<Vec<f64>>),
}

/// Kernel columns `K(·, y_j)`, one spectral field per probe.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub t0: f64,
    pub m0: SpectralField,
    pub probes: Vec<Vec<f64>>,
    pub columns: Vec<SpectralField>,
    full_grid: bool,
}

impl Kernel {
    /// Assembles a kernel from columns; `full_grid` is detected from the probe list.
    pub fn from_columns(
        t0: f64,
        m0: SpectralField,
        probes: Vec<Vec<f64>>,
        columns: Vec<SpectralField>,
    ) -> Result<Self> {
        if probes.len() != columns.len() {
            return Err(Error::Shape {
                expected: probes.len(),
                actual: columns.len(),
            });
        }
        for c in &columns {
            if c.grid() != m0.grid() {
                return Err(Error::GridMismatch);
            }
        }
        let full_grid = probes == full_grid_probes(m0.grid());
        Ok(Self {
            t0,
            m0,
            probes,
            columns,
            full_grid,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.m0.grid()
    }

    pub fn is_full_grid(&self) -> bool {
        self.full_grid
    }

    /// Row-major matrix `K(x_i, y_j)` with `x_i` the grid nodes.
    pub fn values(&self) -> Vec<f64> {
        let ny = self.columns.len();
        let nx = self.grid().len();
        let mut out = vec![0.0; nx * ny];
        for (j, c) in self.columns.iter().enumerate() {
            for (i, v) in c.synthesize().into_iter().enumerate() {
                out[i * ny + j] = v;
            }
        }
        out
    }

    fn require_full_grid(&self) -> Result<()> {
        if self.full_grid {
            Ok(())
        } else {
            Err(Error::UnsupportedGrid)
        }
    }

    /// `⟨μ0, K(·, ·)⟩ = ∫ μ0(y) K(·, y) dy` by the trapezoid rule over the probe grid.
    pub fn pair_with(&self, mu0: &SpectralField) -> Result<SpectralField> {
        self.require_full_grid()?;
        if mu0.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let w = self.grid().cell_volume();
        let mut out = SpectralField::zeros(self.grid());
        for (c, my) in self.columns.iter().zip(mu0.synthesize()) {
            out.axpy(w * my, c);
        }
        Ok(out)
    }

    /// `K(x, y) − ∫ K(x, y') m0(y') dy'`, so that `⟨m0, K⟩ = 0`.
    pub fn normalized(&self) -> Result<Self> {
        let shift = self.pair_with(&self.m0)?;
        let columns = self.columns.iter().map(|c| c - &shift).collect();
        Ok(Self {
            columns,
            ..self.clone()
        })
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let grid = self.grid();
        w.write_all(KERNEL_MAGIC)?;
        w.write_all(&[KERNEL_VERSION, grid.dim() as u8])?;
        w.write_all(&(grid.n() as u32).to_le_bytes())?;
        w.write_all(&(self.probes.len() as u32).to_le_bytes())?;
        for v in self.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.t0.to_le_bytes())?;
        for p in &self.probes {
            for c in p {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        write_field(w, &self.m0)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != KERNEL_MAGIC {
            return Err(Error::Format(format!("bad kernel magic {magic:?}")));
        }
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        if head[0] != KERNEL_VERSION {
            return Err(Error::Format(format!("unsupported kernel version {}", head[0])));
        }
        let d = head[1] as usize;
        let n = read_u32(r)? as usize;
        let grid = TorusGrid::new(d, n).map_err(|e| Error::Format(e.to_string()))?;
        let ny = read_u32(r)? as usize;
        let nx = grid.len();
        let mut values = vec![0.0; nx * ny];
        for v in values.iter_mut() {
            *v = read_f64(r)?;
        }
        let t0 = read_f64(r)?;
        let probes = (0..ny)
            .map(|_| (0..d).map(|_| read_f64(r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let m0 = read_field(r)?;
        if m0.grid() != &grid {
            return Err(Error::Format("kernel density on a different grid".into()));
        }
        let columns = (0..ny)
            .map(|j| {
                let col: Vec<f64> = (0..nx).map(|i| values[i * ny + j]).collect();
                SpectralField::analyze(&grid, &col)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(t0, m0, probes, columns)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// Grid nodes in storage order.
pub fn full_grid_probes(grid: &TorusGrid) -> Vec<Vec<f64>> {
    (0..grid.len())
        .map(|i| grid.node(i)[..grid.dim()].to_vec())
        .collect()
}

/// Solves one linearized problem per probe on a fixed base, in parallel.
pub fn kernel_from_base(
    coeffs: &FrozenCoefficients,
    payoff: &PayoffSpec,
    base: &PathPair,
    probes: &Probes,
    cfg: &SolverConfig,
) -> Result<Kernel> {
    let grid = base.m_path[0].grid();
    let points = match probes {
        Probes::FullGrid => full_grid_probes(grid),
        Probes::Points(p) => p.clone(),
    };
    let results: Vec<Result<SpectralField>> = points
        .par_iter()
        .map(|y| {
            let datum = DistributionalDatum::DiracAt(y.clone());
            solve_linearized(coeffs, payoff, base, &datum, cfg).map(|(pair, _)| pair.v_path[0].clone())
        })
        .collect();
    let mut failed = Vec::new();
    let mut first = None;
    let mut columns = Vec::with_capacity(results.len());
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => columns.push(c),
            Err(e) => {
                failed.push(j);
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        return Err(Error::PartialKernel {
            failed,
            first: Box::new(first),
        });
    }
    Kernel::from_columns(base.time_grid.t0(), base.m_path[0].clone(), points, columns)
}

/// Solves the MFG system from `(t0, m0)` and extracts the kernel at `t0`.
pub fn extract_kernel(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    time_grid: &TimeGrid,
    probes: &Probes,
    cfg: &SolverConfig,
) -> Result<Kernel> {
    let (base, _) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    let coeffs = freeze_coefficients(ham, &base)?;
    kernel_from_base(&coeffs, payoff, &base, probes, cfg)
}

/// `∇_wU(t0, x, m0)(y) = ∇_y K(x, y)` and its `y`-divergence on the full grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WassersteinGradient {
    pub grid: TorusGrid,
    /// Per axis, row-major `x × y` matrix.
    pub grad: Vec<Vec<f64>>,
    /// `Δ_y K`, row-major `x × y`.
    pub divergence: Vec<f64>,
}

/// Spectral differentiation of each row `y ↦ K(x_i, y)`.
fn differentiate_rows(
    grid: &TorusGrid,
    values: &[f64],
    op: impl Fn(&SpectralField) -> SpectralField,
) -> Result<Vec<f64>> {
    let ny = grid.len();
    let mut out = vec![0.0; values.len()];
    for (row_in, row_out) in values.chunks(ny).zip(out.chunks_mut(ny)) {
        let f = SpectralField::analyze(grid, row_in)?;
        row_out.copy_from_slice(&op(&f).synthesize());
    }
    Ok(out)
}

pub fn wasserstein_gradient(kernel: &Kernel) -> Result<WassersteinGradient> {
    kernel.require_full_grid()?;
    let grid = kernel.grid().clone();
    let values = kernel.values();
    let grad = (0..grid.dim())
        .map(|axis| differentiate_rows(&grid, &values, |f| f.partial(axis)))
        .collect::<Result<Vec<_>>>()?;
    let divergence = differentiate_rows(&grid, &values, |f| f.laplacian())?;
    Ok(WassersteinGradient {
        grid,
        grad,
        divergence,
    })
}

/// Columns `y_j ↦ op_y K(·, y_j)` as spectral fields in `x`.
pub(crate) fn derivative_columns(
    kernel: &Kernel,
    op: impl Fn(&SpectralField) -> SpectralField,
) -> Result<Vec<SpectralField>> {
    kernel.require_full_grid()?;
    let grid = kernel.grid();
    let ny = kernel.columns.len();
    let values = differentiate_rows(grid, &kernel.values(), op)?;
    (0..ny)
        .map(|j| {
            let col: Vec<f64> = values.iter().skip(j).step_by(ny).cloned().collect();
            SpectralField::analyze(grid, &col)
        })
        .collect()
}
