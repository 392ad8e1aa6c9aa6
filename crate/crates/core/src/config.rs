//! Numerical parameters shared by the solvers and studies.

use crate::error::{Error, Result};

/// Fixed-point iteration controls.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight `θ` of the new density in `m ← θ·m_new + (1-θ)·m_old`.
    pub damping: f64,
    /// Relative tolerance of the final, unmollified linearized stage.
    pub linear_tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            damping: 0.5,
            linear_tol: 1e-12,
        }
    }
}

/// Regularity indices, ball radius and iteration controls.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Sobolev index `s`.
    pub s: f64,
    /// Taylor index `r`.
    pub r: f64,
    /// Radius `R` of the admissible density ball around the uniform density.
    pub radius: f64,
    pub picard: PicardConfig,
    /// Mollifier widths of the intermediate linearized stages; a final `ε = 0` stage always follows.
    pub mollification: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            s: 6.0,
            r: 1.25,
            radius: 1.0,
            picard: PicardConfig::default(),
            mollification: vec![0.5, 0.25, 0.125],
        }
    }
}

impl SolverConfig {
    /// Smallest integer `s` must exceed in dimension `d`.
    pub fn s_lower_bound(d: usize) -> f64 {
        let half_up = d.div_ceil(2);
        let a = (d + 5).div_ceil(2) + 1;
        let b = 4 * half_up + 1;
        a.max(b) as f64
    }

    /// Checks the regularity conditions on `s` and `r` for dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let bound = Self::s_lower_bound(d);
        if !(self.s > bound) {
            return Err(Error::InvalidArgument(format!(
                "s = {} violates s > max{{ceil((d+5)/2)+1, 4 ceil(d/2)+1}} = {bound} for d = {d}",
                self.s
            )));
        }
        let half_up = d.div_ceil(2) as f64;
        if !(self.r > half_up) {
            return Err(Error::InvalidArgument(format!(
                "r = {} violates r > ceil(d/2) = {half_up}",
                self.r
            )));
        }
        if !(4.0 * self.r + 1.0 <= self.s) {
            return Err(Error::InvalidArgument(format!(
                "r = {}, s = {} violates 4r + 1 <= s",
                self.r, self.s
            )));
        }
        if !(4.0 * self.r + 1.0 > bound) {
            return Err(Error::InvalidArgument(format!(
                "r = {} violates 4r + 1 > {bound}",
                self.r
            )));
        }
        let p = &self.picard;
        if !(p.tol > 0.0 && p.linear_tol > 0.0) || p.max_iter == 0 || !(p.damping > 0.0 && p.damping <= 1.0) {
            return Err(Error::InvalidArgument(
                "picard needs tol > 0, max_iter > 0 and damping in (0, 1]".into(),
            ));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        if self.mollification.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidArgument("mollifier widths must be non-negative".into()));
        }
        Ok(())
    }
}
