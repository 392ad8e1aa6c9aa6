//! Binary field snapshots.
//!
//! Layout: magic `MFGM`, version byte `1`, dimension byte, `n` as `u32` LE, then
//! `n^d` coefficients as interleaved `f64` LE `(re, im)` pairs in row-major
//! wavenumber order from `-n/2` to `n/2-1` on each axis.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"MFGM";
pub const FIELD_VERSION: u8 = 1;

pub fn write_field<W: Write>(w: &mut W, field: &SpectralField) -> Result<()> {
    let grid = field.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&[FIELD_VERSION, grid.dim() as u8])?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    for storage in wavenumber_order(grid) {
        let c = field.coeffs()[storage];
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(r: &mut R) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format(format!("bad field magic {magic:?}")));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != FIELD_VERSION {
        return Err(Error::Format(format!("unsupported field version {}", head[0])));
    }
    let n = read_u32(r)? as usize;
    let grid = TorusGrid::new(head[1] as usize, n).map_err(|e| Error::Format(e.to_string()))?;
    let mut coeffs = vec![Complex64::default(); grid.len()];
    for storage in wavenumber_order(&grid) {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        coeffs[storage] = Complex64::new(re, im);
    }
    SpectralField::from_coeffs(&grid, coeffs)
}

pub fn field_to_bytes(field: &SpectralField) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 16 * field.grid().len());
    write_field(&mut out, field).expect("writing to a Vec cannot fail");
    out
}

/// Storage indices listed in file order.
fn wavenumber_order(grid: &TorusGrid) -> Vec<usize> {
    let n = grid.n();
    let d = grid.dim();
    (0..grid.len())
        .map(|file_flat| {
            let mut rem = file_flat;
            let mut digits = [0usize; super::grid::MAX_DIM];
            for axis in (0..d).rev() {
                digits[axis] = rem % n;
                rem /= n;
            }
            digits[..d].iter().fold(0, |acc, &j| {
                // file digit j ↔ wavenumber j - n/2
                let k = j as i64 - (n / 2) as i64;
                acc * n + k.rem_euclid(n as i64) as usize
            })
        })
        .collect()
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
