//! Trajectory storage and the `MFGP` path format.
//!
//! A path is the magic `MFGP`, a version byte, the node count as `u32` LE, the
//! initial and terminal times as `f64` LE, then one field snapshot per node in
//! time order. A [`PathPair`] is stored as its value path followed by its
//! density path.

use std::io::{Read, Write};

use super::time::TimeGrid;
use crate::error::{Error, Result};
use crate::spectral::snapshot::{read_f64, read_field, read_u32, write_field};
use crate::spectral::SpectralField;

pub const PATH_MAGIC: &[u8; 4] = b"MFGP";
pub const PATH_VERSION: u8 = 1;

/// Value function and density at every node of a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPair {
    pub time_grid: TimeGrid,
    pub u_path: Vec<SpectralField>,
    pub m_path: Vec<SpectralField>,
}

impl PathPair {
    pub fn u0(&self) -> &SpectralField {
        &self.u_path[0]
    }

    pub fn m_terminal(&self) -> &SpectralField {
        self.m_path.last().expect("paths are never empty")
    }

    /// Largest deviation of `m̂(0, t)` from its initial value.
    pub fn mass_drift(&self) -> f64 {
        mean_drift(&self.m_path)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_path(w, &self.time_grid, &self.u_path)?;
        write_path(w, &self.time_grid, &self.m_path)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let (tu, u_path) = read_path(r)?;
        let (tm, m_path) = read_path(r)?;
        if tu != tm {
            return Err(Error::Format("value and density paths use different time grids".into()));
        }
        Ok(Self {
            time_grid: tu,
            u_path,
            m_path,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

pub(crate) fn mean_drift(path: &[SpectralField]) -> f64 {
    let first = path.first().map(|f| f.mean()).unwrap_or(0.0);
    path.iter().map(|f| (f.mean() - first).abs()).fold(0.0, f64::max)
}

pub fn write_path<W: Write>(w: &mut W, grid: &TimeGrid, fields: &[SpectralField]) -> Result<()> {
    if fields.len() != grid.len() {
        return Err(Error::Shape {
            expected: grid.len(),
            actual: fields.len(),
        });
    }
    w.write_all(PATH_MAGIC)?;
    w.write_all(&[PATH_VERSION])?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    w.write_all(&grid.t0().to_le_bytes())?;
    w.write_all(&grid.t_end().to_le_bytes())?;
    for f in fields {
        write_field(w, f)?;
    }
    Ok(())
}

pub fn read_path<R: Read>(r: &mut R) -> Result<(TimeGrid, Vec<SpectralField>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PATH_MAGIC {
        return Err(Error::Format(format!("bad path magic {magic:?}")));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != PATH_VERSION {
        return Err(Error::Format(format!("unsupported path version {}", version[0])));
    }
    let count = read_u32(r)? as usize;
    let t0 = read_f64(r)?;
    let t_end = read_f64(r)?;
    if count < 2 {
        return Err(Error::Format(format!("path with {count} nodes")));
    }
    let grid = TimeGrid::new(t0, t_end, count - 1).map_err(|e| Error::Format(e.to_string()))?;
    let fields = (0..count).map(|_| read_field(r)).collect::<Result<Vec<_>>>()?;
    if fields.windows(2).any(|w| w[0].grid() != w[1].grid()) {
        return Err(Error::Format("snapshots on different grids".into()));
    }
    Ok((grid, fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;

    #[test]
    fn roundtrip() {
        let g = TorusGrid::new(1, 8).unwrap();
        let tg = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let f = |a: f64| SpectralField::from_fn(&g, move |x| a * x[0].cos());
        let pair = PathPair {
            time_grid: tg,
            u_path: vec![f(1.0), f(2.0), f(3.0)],
            m_path: vec![f(0.1), f(0.2), f(0.3)],
        };
        let bytes = pair.to_bytes();
        assert_eq!(&bytes[..4], b"MFGP");
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 3);
        assert_eq!(PathPair::read(&mut bytes.as_slice()).unwrap(), pair);
    }
}
