use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftDirection;

use super::fft;
use super::grid::{TorusGrid, MAX_DIM};
use crate::error::{Error, Result};

/// Truncated Fourier series of a scalar field on the torus.
///
/// Coefficients follow `f̂(k) = (2π)^{-d} ∫ e^{-ik·x} f(x) dx`, so the constant
/// field `1` has `f̂(0) = 1` and unit `L²` norm.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn constant(grid: &TorusGrid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    /// Builds a field from coefficients in storage (FFT) order; non-retained modes are zeroed.
    pub fn from_coeffs(grid: &TorusGrid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        for (i, c) in coeffs.iter_mut().enumerate() {
            if !grid.is_retained(i) {
                *c = Complex64::default();
            }
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Samples a closure at the grid nodes and analyzes the result.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| f(&grid.node(i)[..grid.dim()]))
            .collect();
        Self::analyze(grid, &values).expect("sample count matches grid")
    }

    /// Fourier coefficients of nodal samples (discrete transform divided by `n^d`).
    pub fn analyze(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::transform(&mut data, grid.n(), grid.dim(), FftDirection::Forward);
        let scale = (grid.len() as f64).recip();
        for (i, c) in data.iter_mut().enumerate() {
            *c = if grid.is_retained(i) {
                *c * scale
            } else {
                Complex64::default()
            };
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs: data,
        })
    }

    /// Complex nodal values `Σ_k f̂(k) e^{ik·x_j}`.
    pub fn synthesize_complex(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        fft::transform(&mut data, self.grid.n(), self.grid.dim(), FftDirection::Inverse);
        data
    }

    /// Real nodal values.
    pub fn synthesize(&self) -> Vec<f64> {
        self.synthesize_complex().into_iter().map(|c| c.re).collect()
    }

    /// Largest imaginary part of the nodal values; zero for real fields.
    pub fn max_imag(&self) -> f64 {
        self.synthesize_complex()
            .iter()
            .fold(0.0, |acc, c| acc.max(c.im.abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.synthesize().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Coefficients in storage order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of the integer wavevector `k` (zero when not representable).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.grid
            .mode_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Mean value `f̂(0)`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `∫ f dx`.
    pub fn mass(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    /// Whether `f̂(-k) = conj f̂(k)` holds to `tol` (absolute) on all retained modes.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.grid.dim();
        (0..self.grid.len()).all(|i| {
            let k = self.grid.wavevector(i);
            let mut neg = [0i64; MAX_DIM];
            for axis in 0..d {
                neg[axis] = -(k[axis] as i64);
            }
            match self.grid.mode_index(&neg[..d]) {
                Some(j) => (self.coeffs[j] - self.coeffs[i].conj()).norm() <= tol,
                None => self.coeffs[i].norm() <= tol,
            }
        })
    }

    /// Multiplies every coefficient by a real symbol of `(wavevector, |k|²)`.
    pub fn apply_symbol(&self, symbol: impl Fn(&[f64], f64) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == Complex64::default() {
                    c
                } else {
                    c * symbol(self.grid.wavevector(i), self.grid.ksq(i))
                }
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// `Λ^l f`, the multiplier `(1+|k|²)^{l/2}`.
    pub fn lambda_apply(&self, l: f64) -> Self {
        self.apply_symbol(|_, ksq| (1.0 + ksq).powf(0.5 * l))
    }

    /// `‖f‖_{H^l} = (Σ |f̂(k)|² (1+|k|²)^l)^{1/2}` over the retained modes.
    pub fn sobolev_norm(&self, l: f64) -> f64 {
        self.sobolev_norm_sq(l).sqrt()
    }

    pub fn sobolev_norm_sq(&self, l: f64) -> f64 {
        let ksq = self.grid.ksq_table();
        if l == 0.0 {
            return self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        }
        self.coeffs
            .iter()
            .zip(ksq)
            .map(|(c, &k2)| c.norm_sqr() * (1.0 + k2).powf(l))
            .sum()
    }

    /// `∂_{x_axis} f`.
    pub fn partial(&self, axis: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if self.grid.is_retained(i) {
                    c * Complex64::new(0.0, self.grid.wavevector(i)[axis])
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim()).map(|axis| self.partial(axis)).collect()
    }

    pub fn laplacian(&self) -> Self {
        self.apply_symbol(|_, ksq| -ksq)
    }

    /// Divergence of a vector field given by its components.
    pub fn divergence(components: &[Self]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("divergence of an empty vector field".into()))?;
        if components.len() != first.grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "vector field has {} components on a {}-dimensional torus",
                components.len(),
                first.grid.dim()
            )));
        }
        let mut out = Self::zeros(&first.grid);
        for (axis, c) in components.iter().enumerate() {
            ensure_same_grid(first, c)?;
            out.add_assign(&c.partial(axis));
        }
        Ok(out)
    }

    /// Gaussian mollifier `e^{-ε²|k|²}`.
    pub fn mollify(&self, eps: f64) -> Self {
        if eps == 0.0 {
            return self.clone();
        }
        let e2 = eps * eps;
        self.apply_symbol(|_, ksq| (-e2 * ksq).exp())
    }

    /// Heat semigroup `e^{τΔ}`.
    pub fn heat_propagate(&self, tau: f64) -> Self {
        self.apply_symbol(|_, ksq| (-ksq * tau).exp())
    }

    /// Removes the mean mode.
    pub fn project_zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = Complex64::default();
        out
    }

    /// `Σ_k conj(f̂(k)) ĝ(k)`, the pairing whose diagonal is the `L²` norm squared.
    pub fn pairing(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `∫ f g dx` for real fields.
    pub fn integrate_product(&self, other: &Self) -> f64 {
        self.pairing(other).re * self.grid.volume()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    /// `θ·self + (1-θ)·other`.
    pub fn blend(&self, theta: f64, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * theta + b * (1.0 - theta))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::default())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Same function on another resolution: modes are truncated or zero-padded.
    pub fn resample(&self, grid: &TorusGrid) -> Result<Self> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let mut out = Self::zeros(grid);
        let d = grid.dim();
        for i in 0..self.grid.len() {
            if self.coeffs[i] == Complex64::default() {
                continue;
            }
            let mut k = [0i64; MAX_DIM];
            for (axis, kj) in self.grid.wavevector(i).iter().enumerate() {
                k[axis] = *kj as i64;
            }
            if let Some(j) = grid.mode_index(&k[..d]) {
                if grid.is_retained(j) {
                    out.coeffs[j] = self.coeffs[i];
                }
            }
        }
        Ok(out)
    }

    /// Real nodal values on the refined `2n`-per-axis grid (zero padding).
    pub fn to_refined(&self) -> Vec<f64> {
        let mut data = vec![Complex64::default(); self.grid.refined_len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != Complex64::default() {
                data[self.grid.refined_index(i)] = c;
            }
        }
        fft::transform(
            &mut data,
            self.grid.refined_n(),
            self.grid.dim(),
            FftDirection::Inverse,
        );
        data.into_iter().map(|c| c.re).collect()
    }

    /// Analyzes samples on the refined grid and truncates back to the retained modes of `grid`.
    pub fn from_refined(grid: &TorusGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.refined_len() {
            return Err(Error::Shape {
                expected: grid.refined_len(),
                actual: values.len(),
            });
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::transform(&mut data, grid.refined_n(), grid.dim(), FftDirection::Forward);
        let scale = (grid.refined_len() as f64).recip();
        let coeffs = (0..grid.len())
            .map(|i| {
                if grid.is_retained(i) {
                    data[grid.refined_index(i)] * scale
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Dealiased evaluation of a pointwise function of several fields.
    ///
    /// Inputs are synthesized on the refined grid, `f(inputs, x)` is applied at
    /// every refined node and the result is truncated back to `n` modes.
    pub fn pointwise_apply(
        fields: &[&Self],
        f: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let mut out = Self::pointwise_map(fields, 1, |inputs, x, out| out[0] = f(inputs, x))?;
        Ok(out.pop().expect("one output"))
    }

    /// Multi-output variant of [`pointwise_apply`](Self::pointwise_apply).
    pub fn pointwise_map(
        fields: &[&Self],
        outputs: usize,
        f: impl Fn(&[f64], &[f64], &mut [f64]),
    ) -> Result<Vec<Self>> {
        let grid = fields
            .first()
            .map(|g| g.grid.clone())
            .ok_or_else(|| Error::InvalidArgument("pointwise map needs at least one field".into()))?;
        for g in fields {
            ensure_same_grid(fields[0], g)?;
        }
        let samples: Vec<Vec<f64>> = fields.iter().map(|g| g.to_refined()).collect();
        let values = map_refined(&grid, &samples, outputs, f)?;
        values
            .iter()
            .map(|v| Self::from_refined(&grid, v))
            .collect()
    }
}

/// Applies `f` at every refined node to pre-synthesized samples.
pub(crate) fn map_refined(
    grid: &TorusGrid,
    samples: &[Vec<f64>],
    outputs: usize,
    f: impl Fn(&[f64], &[f64], &mut [f64]),
) -> Result<Vec<Vec<f64>>> {
    let len = grid.refined_len();
    let d = grid.dim();
    let mut out = vec![vec![0.0; len]; outputs];
    let mut inputs = vec![0.0; samples.len()];
    let mut result = vec![0.0; outputs];
    for node in 0..len {
        for (slot, s) in inputs.iter_mut().zip(samples) {
            *slot = s[node];
        }
        let x = grid.refined_node(node);
        f(&inputs, &x[..d], &mut result);
        for (o, &r) in out.iter_mut().zip(&result) {
            if !r.is_finite() {
                return Err(Error::NonlinearityDomain {
                    node,
                    inputs: inputs.clone(),
                    value: r,
                });
            }
            o[node] = r;
        }
    }
    Ok(out)
}

pub(crate) fn ensure_same_grid(a: &SpectralField, b: &SpectralField) -> Result<()> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    // direct O(n²) DFT used as an independent oracle
    fn direct_coeff(values: &[f64], k: i64) -> Complex64 {
        let n = values.len();
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let x = 2.0 * PI * j as f64 / n as f64;
                Complex64::from_polar(v, -(k as f64) * x)
            })
            .sum::<Complex64>()
            / n as f64
    }

    #[test]
    fn analyze_constant() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = SpectralField::analyze(&g, &vec![1.0; 64]).unwrap();
        assert!((f.coeffs()[0].re - 1.0).abs() < 1e-15);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn analyze_matches_direct_sum() {
        let g = grid1(16);
        for (func, name) in [
            (f64::cos as fn(f64) -> f64, "cos"),
            (f64::sin as fn(f64) -> f64, "sin"),
        ] {
            let values: Vec<f64> = (0..16).map(|j| func(2.0 * PI * j as f64 / 16.0)).collect();
            let f = SpectralField::analyze(&g, &values).unwrap();
            for k in -7..8 {
                let expected = direct_coeff(&values, k);
                assert!((f.coeff(&[k]) - expected).norm() < 1e-14, "{name} k={k}");
            }
        }
        let sin = SpectralField::from_fn(&g, |x| x[0].sin());
        assert!((sin.coeff(&[1]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((sin.coeff(&[-1]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        assert!((cos.coeff(&[1]).re - 0.5).abs() < 1e-15);
        assert!((cos.coeff(&[-1]).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn analyze_rejects_wrong_length() {
        let g = grid1(8);
        assert!(matches!(
            SpectralField::analyze(&g, &[0.0; 7]),
            Err(Error::Shape { expected: 8, actual: 7 })
        ));
    }

    #[test]
    fn lambda_examples() {
        let g = grid1(16);
        let one = SpectralField::constant(&g, 1.0);
        assert_eq!(one.lambda_apply(-3.7), one);
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        let l2 = cos.lambda_apply(2.0);
        assert!((l2.coeff(&[1]).re - 1.0).abs() < 1e-15);
        let lm1 = cos.lambda_apply(-1.0);
        assert!((lm1.coeff(&[-1]).re - 0.5 * 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid1(16);
        let one = SpectralField::constant(&g, 1.0);
        for l in [-7.0, -1.0, 0.0, 1.5, 6.0] {
            assert!((one.sobolev_norm(l) - 1.0).abs() < 1e-15);
        }
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        assert!((cos.sobolev_norm(0.0) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let g = grid1(16);
        assert!(SpectralField::constant(&g, 1.0).gradient()[0].is_zero());
        let sin = SpectralField::from_fn(&g, |x| x[0].sin());
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        let d = &sin.gradient()[0] - &cos;
        assert!(d.sobolev_norm(0.0) < 1e-15);
    }

    #[test]
    fn pointwise_examples() {
        let g = grid1(16);
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        let same = SpectralField::pointwise_apply(&[&cos], |v, _| v[0]).unwrap();
        assert!((&same - &cos).sobolev_norm(0.0) < 1e-15);
        let sq = SpectralField::pointwise_apply(&[&cos, &cos], |v, _| v[0] * v[1]).unwrap();
        assert!((sq.coeff(&[0]).re - 0.5).abs() < 1e-15);
        assert!((sq.coeff(&[2]).re - 0.25).abs() < 1e-15);
        assert!((sq.coeff(&[-2]).re - 0.25).abs() < 1e-15);
        assert!(sq.coeff(&[1]).norm() < 1e-15);
    }

    #[test]
    fn pointwise_reports_non_finite() {
        let g = grid1(8);
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        let err = SpectralField::pointwise_apply(&[&cos], |v, _| v[0].ln()).unwrap_err();
        match err {
            Error::NonlinearityDomain { inputs, value, .. } => {
                assert_eq!(inputs.len(), 1);
                assert!(!value.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mollify_and_projection_examples() {
        let g = grid1(16);
        let one = SpectralField::constant(&g, 1.0);
        assert_eq!(one.mollify(0.3), one);
        let cos = SpectralField::from_fn(&g, |x| x[0].cos());
        assert!((cos.mollify(1.0).coeff(&[1]).re - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        assert!(one.project_zero_mean().is_zero());
        let shifted = SpectralField::from_fn(&g, |x| 1.0 + x[0].cos());
        assert!((&shifted.project_zero_mean() - &cos).sobolev_norm(0.0) < 1e-15);
    }

    #[test]
    fn resample_roundtrip() {
        let g = grid1(16);
        let fine = grid1(32);
        let f = SpectralField::from_fn(&g, |x| (x[0].sin() * 2.0).exp());
        let back = f.resample(&fine).unwrap().resample(&g).unwrap();
        assert_eq!(back, f);
    }
}
