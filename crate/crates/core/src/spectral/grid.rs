use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest torus dimension supported by the solvers.
pub const MAX_DIM: usize = 3;

/// Uniform grid on the flat torus `[0, 2π)^d` with `n` nodes (and modes) per axis.
///
/// Spectral storage uses FFT order on each axis (`0, 1, …, n/2-1, -n/2, …, -1`),
/// row-major with the last axis fastest. Modes with any component equal to the
/// Nyquist wavenumber `-n/2` are never retained.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    tables: Arc<Tables>,
}

struct Tables {
    wavevectors: Vec<[f64; MAX_DIM]>,
    ksq: Vec<f64>,
    retained: Vec<bool>,
    // flat index into the 2n-per-axis refined grid for each mode
    refined_index: Vec<usize>,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "modes per axis must be even and at least 4, got {n}"
            )));
        }
        let len = n.pow(dim as u32);
        let refined_n = 2 * n;
        let mut wavevectors = Vec::with_capacity(len);
        let mut ksq = Vec::with_capacity(len);
        let mut retained = Vec::with_capacity(len);
        let mut refined_index = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = unravel(flat, n, dim);
            let mut k = [0.0; MAX_DIM];
            let mut keep = true;
            let mut fine = 0usize;
            for axis in 0..dim {
                let w = wavenumber(idx[axis], n);
                keep &= idx[axis] != n / 2;
                k[axis] = w as f64;
                fine = fine * refined_n + w.rem_euclid(refined_n as i64) as usize;
            }
            ksq.push(k.iter().map(|v| v * v).sum());
            wavevectors.push(k);
            retained.push(keep);
            refined_index.push(fine);
        }
        Ok(Self {
            dim,
            n,
            tables: Arc::new(Tables {
                wavevectors,
                ksq,
                retained,
                refined_index,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes (and nodes) per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.tables.ksq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes per axis of the dealiasing grid.
    pub fn refined_n(&self) -> usize {
        2 * self.n
    }

    pub fn refined_len(&self) -> usize {
        self.refined_n().pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Trapezoid weight of one node, `(2π/n)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `(2π)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Uniform probability density `(2π)^{-d}`.
    pub fn uniform_density(&self) -> f64 {
        self.volume().recip()
    }

    pub fn wavevector(&self, flat: usize) -> &[f64] {
        &self.tables.wavevectors[flat][..self.dim]
    }

    pub fn ksq(&self, flat: usize) -> f64 {
        self.tables.ksq[flat]
    }

    pub fn ksq_table(&self) -> &[f64] {
        &self.tables.ksq
    }

    pub fn is_retained(&self, flat: usize) -> bool {
        self.tables.retained[flat]
    }

    pub(crate) fn refined_index(&self, flat: usize) -> usize {
        self.tables.refined_index[flat]
    }

    /// Flat index of the mode with integer wavevector `k`, if it is representable.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let half = (self.n / 2) as i64;
        let mut flat = 0;
        for &kj in k {
            if kj < -half || kj >= half {
                return None;
            }
            flat = flat * self.n + kj.rem_euclid(self.n as i64) as usize;
        }
        Some(flat)
    }

    /// Coordinates of node `flat` on this grid.
    pub fn node(&self, flat: usize) -> [f64; MAX_DIM] {
        node_coords(flat, self.n, self.dim)
    }

    pub fn refined_node(&self, flat: usize) -> [f64; MAX_DIM] {
        node_coords(flat, self.refined_n(), self.dim)
    }

    /// Same geometry with `n` replaced.
    pub fn with_modes(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n)
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

pub(crate) fn unravel(mut flat: usize, n: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut idx = [0; MAX_DIM];
    for axis in (0..dim).rev() {
        idx[axis] = flat % n;
        flat /= n;
    }
    idx
}

fn node_coords(flat: usize, n: usize, dim: usize) -> [f64; MAX_DIM] {
    let idx = unravel(flat, n, dim);
    let h = 2.0 * PI / n as f64;
    let mut x = [0.0; MAX_DIM];
    for axis in 0..dim {
        x[axis] = h * idx[axis] as f64;
    }
    x
}
