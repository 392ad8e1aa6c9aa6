use crate::error::{Error, Result};
use crate::spectral::{ensure_same_grid, SpectralField, TorusGrid};

/// Fourier symbol `Ŵ(k)` of the smoothing kernel in the terminal cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSymbol {
    /// `Ŵ(k) = e^{-a|k|²}`.
    Gaussian { decay: f64 },
}

impl KernelSymbol {
    pub fn eval(&self, ksq: f64) -> f64 {
        match *self {
            Self::Gaussian { decay } => (-decay * ksq).exp(),
        }
    }
}

/// Pointwise transform `g` applied to the density before smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityTransform {
    Tanh,
    /// `g(q) = q`; only locally bounded.
    Identity,
    /// `g ≡ 0`, making the terminal cost independent of the density.
    Zero,
}

impl DensityTransform {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Self::Tanh),
            "identity" => Ok(Self::Identity),
            "zero" => Ok(Self::Zero),
            other => Err(Error::InvalidArgument(format!("unknown density transform `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Identity => "identity",
            Self::Zero => "zero",
        }
    }

    pub fn g(&self, q: f64) -> f64 {
        match self {
            Self::Tanh => q.tanh(),
            Self::Identity => q,
            Self::Zero => 0.0,
        }
    }

    pub fn g_prime(&self, q: f64) -> f64 {
        match self {
            Self::Tanh => {
                let c = q.cosh();
                1.0 / (c * c)
            }
            Self::Identity => 1.0,
            Self::Zero => 0.0,
        }
    }
}

/// Density-independent part of the terminal cost, `A cos(j x₁)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedCost {
    pub amplitude: f64,
    pub mode: u32,
}

impl FixedCost {
    pub fn field(&self, grid: &TorusGrid) -> SpectralField {
        let j = self.mode as f64;
        SpectralField::from_fn(grid, |x| self.amplitude * (j * x[0]).cos())
    }
}

/// Terminal cost `G(x, m) = φ(x) + [W * g(m)](x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffSpec {
    pub kernel: KernelSymbol,
    pub transform: DensityTransform,
    pub fixed: Option<FixedCost>,
}

impl Default for PayoffSpec {
    fn default() -> Self {
        Self {
            kernel: KernelSymbol::Gaussian { decay: 1.0 },
            transform: DensityTransform::Tanh,
            fixed: None,
        }
    }
}

impl PayoffSpec {
    /// Density-independent terminal cost `φ`.
    pub fn fixed(cost: FixedCost) -> Self {
        Self {
            transform: DensityTransform::Zero,
            fixed: Some(cost),
            ..Self::default()
        }
    }

    pub fn depends_on_density(&self) -> bool {
        self.transform != DensityTransform::Zero
    }

    /// `G(·, m)`.
    pub fn g_eval(&self, m: &SpectralField) -> Result<SpectralField> {
        let mut out = if self.depends_on_density() {
            let t = self.transform;
            SpectralField::pointwise_apply(&[m], |v, _| t.g(v[0]))?
                .apply_symbol(|_, ksq| self.kernel.eval(ksq))
        } else {
            SpectralField::zeros(m.grid())
        };
        if let Some(fixed) = &self.fixed {
            out.add_assign(&fixed.field(m.grid()));
        }
        Ok(out)
    }

    /// `(δG/δm)(·, m) μ = W * (g'(m) μ)`.
    pub fn dg_dm_apply(&self, m: &SpectralField, mu: &SpectralField) -> Result<SpectralField> {
        ensure_same_grid(m, mu)?;
        if !self.depends_on_density() || mu.is_zero() {
            return Ok(SpectralField::zeros(m.grid()));
        }
        let t = self.transform;
        Ok(SpectralField::pointwise_apply(&[m, mu], |v, _| t.g_prime(v[0]) * v[1])?
            .apply_symbol(|_, ksq| self.kernel.eval(ksq)))
    }

    /// Same linear map acting on refined-grid samples of `g'(m)` and `μ`.
    pub(crate) fn dg_dm_refined(
        &self,
        grid: &TorusGrid,
        g_prime: &[f64],
        mu: &SpectralField,
    ) -> Result<SpectralField> {
        if !self.depends_on_density() || mu.is_zero() {
            return Ok(SpectralField::zeros(grid));
        }
        let mu_fine = mu.to_refined();
        let prod: Vec<f64> = g_prime.iter().zip(&mu_fine).map(|(a, b)| a * b).collect();
        Ok(SpectralField::from_refined(grid, &prod)?.apply_symbol(|_, ksq| self.kernel.eval(ksq)))
    }

    pub(crate) fn g_prime_refined(&self, m: &SpectralField) -> Vec<f64> {
        let t = self.transform;
        m.to_refined().into_iter().map(|q| t.g_prime(q)).collect()
    }
}
