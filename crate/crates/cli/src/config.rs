//! Run configuration: TOML sections of `key = value` pairs, dotted overrides,
//! validation and the content hash embedded in every output.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use torus_mfg::mfg::TimeGrid;
use torus_mfg::model::{BuiltinHamiltonian, DensityTransform, FixedCost, KernelSymbol, PayoffSpec};
use torus_mfg::spectral::{SpectralField, TorusGrid};
use torus_mfg::{PicardConfig, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { d: 1, n: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevSection {
    pub s: f64,
    pub r: f64,
}

impl Default for SobolevSection {
    fn default() -> Self {
        Self { s: 6.0, r: 1.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { t0: 0.0, t_end: 0.1, n_steps: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSection {
    pub name: String,
    pub params: Vec<f64>,
}

impl Default for HamiltonianSection {
    fn default() -> Self {
        Self { name: "nonseparable".into(), params: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffSection {
    /// Decay `a` of the Gaussian smoothing symbol `e^{−a|k|²}`.
    pub decay: f64,
    /// `tanh`, `identity` or `zero`.
    pub g: String,
    /// Amplitude of the fixed cost `A cos(j x₁)`; zero disables it.
    pub fixed_amplitude: f64,
    pub fixed_mode: u32,
}

impl Default for PayoffSection {
    fn default() -> Self {
        Self { decay: 1.0, g: "tanh".into(), fixed_amplitude: 0.0, fixed_mode: 1 }
    }
}

/// `m0 = m̄(1 + amplitude·cos(mode·x₁))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub amplitude: f64,
    pub mode: u32,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { amplitude: 0.3, mode: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub linear_tol: f64,
    pub mollification: Vec<f64>,
    pub radius: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        let p = PicardConfig::default();
        let s = SolverConfig::default();
        Self {
            tol: p.tol,
            max_iter: p.max_iter,
            damping: p.damping,
            linear_tol: p.linear_tol,
            mollification: s.mollification,
            radius: s.radius,
        }
    }
}

/// Initial perturbation of `solve-linearized`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizedSection {
    /// `dirac`, `dirac-gradient`, `mode` (`cos(k x₁)`) or `direction` (the study direction `χ`).
    pub datum: String,
    pub point: Vec<f64>,
    pub axis: usize,
    pub mode: i64,
}

impl Default for LinearizedSection {
    fn default() -> Self {
        Self { datum: "dirac".into(), point: vec![0.0], axis: 0, mode: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Zero probes the full grid; otherwise equispaced probes along `x₁`.
    pub probe_count: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { probe_count: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionSection {
    /// `default` for `cos x₁ + ½cos(2x₁ + 1)`, `random` for a seeded band-limited field.
    pub kind: String,
    pub max_mode: usize,
    pub seed: u64,
}

impl Default for DirectionSection {
    fn default() -> Self {
        Self { kind: "default".into(), max_mode: 4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorSection {
    pub eps: Vec<f64>,
    /// Direction scale in units of the uniform density.
    pub scale: f64,
    /// Picard tolerance of the study; remainders are only fitted above 100× this.
    pub tol: f64,
}

impl Default for TaylorSection {
    fn default() -> Self {
        Self { eps: (3..=9).map(|j| 2f64.powi(-j)).collect(), scale: 1.0, tol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub exponents: Vec<i32>,
    pub scale: f64,
    pub spread: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self { exponents: (1..=6).collect(), scale: 0.25, spread: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HminusSection {
    pub k_max: i64,
    pub diracs: usize,
    pub dirac_gradients: usize,
    pub spread: f64,
}

impl Default for HminusSection {
    fn default() -> Self {
        Self { k_max: 16, diracs: 8, dirac_gradients: 0, spread: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularitySection {
    pub spread: f64,
    /// Also extracts the kernel on the grid with `2n` modes and compares.
    pub refine: bool,
    pub refine_tolerance: f64,
}

impl Default for RegularitySection {
    fn default() -> Self {
        Self { spread: 10.0, refine: true, refine_tolerance: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterSection {
    /// Lowest accepted residual ratio when the step is halved.
    pub refinement_factor: f64,
    pub uniqueness: bool,
}

impl Default for MasterSection {
    fn default() -> Self {
        Self { refinement_factor: 1.8, uniqueness: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub samples: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { samples: 4, points: 32, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSection {
    /// `one`, `initial`, `cos` or `dirac`.
    pub field: String,
    pub indices: Vec<f64>,
}

impl Default for NormsSection {
    fn default() -> Self {
        Self { field: "initial".into(), indices: vec![-7.0, -1.0, 0.0, 1.0, 6.0] }
    }
}

/// Settings that do not affect numerics and are left out of the hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub cache_dir: Option<String>,
    pub workers: usize,
    pub out: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub sobolev: SobolevSection,
    pub time: TimeSection,
    pub hamiltonian: HamiltonianSection,
    pub payoff: PayoffSection,
    pub initial: InitialSection,
    pub picard: PicardSection,
    pub linearized: LinearizedSection,
    pub kernel: KernelSection,
    pub direction: DirectionSection,
    pub taylor: TaylorSection,
    pub stability: StabilitySection,
    pub hminus: HminusSection,
    pub regularity: RegularitySection,
    pub master: MasterSection,
    pub audit: AuditSection,
    pub norms: NormsSection,
    pub run: RunSection,
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    let wrapped = format!("v = {value}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies `section.key=value` to a parsed document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let (last, sections) = parts.split_last().expect("non-empty");
    let mut table = doc;
    for s in sections {
        table = table
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key `{key}`: `{s}` is not a section"))?;
    }
    table.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads an optional file and applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            s: self.sobolev.s,
            r: self.sobolev.r,
            radius: self.picard.radius,
            picard: PicardConfig {
                tol: self.picard.tol,
                max_iter: self.picard.max_iter,
                damping: self.picard.damping,
                linear_tol: self.picard.linear_tol,
            },
            mollification: self.picard.mollification.clone(),
        }
    }

    /// Checks every invariant, naming the violated inequality.
    pub fn validate(&self) -> Result<()> {
        let d = self.grid.d;
        self.grid_for(self.grid.n).context("invalid [grid]")?;
        self.solver().validate(d).map_err(|e| anyhow!("invalid configuration: {e}"))?;
        self.time_grid()?;
        self.hamiltonian()?;
        self.payoff()?;
        Ok(())
    }

    pub fn grid_for(&self, n: usize) -> Result<TorusGrid> {
        Ok(TorusGrid::new(self.grid.d, n)?)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        self.grid_for(self.grid.n)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.time.t0, self.time.t_end, self.time.n_steps)?)
    }

    pub fn hamiltonian(&self) -> Result<BuiltinHamiltonian> {
        Ok(BuiltinHamiltonian::from_name(&self.hamiltonian.name, &self.hamiltonian.params)?)
    }

    pub fn payoff(&self) -> Result<PayoffSpec> {
        let transform = DensityTransform::from_name(&self.payoff.g)?;
        let fixed = (self.payoff.fixed_amplitude != 0.0).then_some(FixedCost {
            amplitude: self.payoff.fixed_amplitude,
            mode: self.payoff.fixed_mode,
        });
        Ok(PayoffSpec {
            kernel: KernelSymbol::Gaussian { decay: self.payoff.decay },
            transform,
            fixed,
        })
    }

    pub fn initial_density(&self, grid: &TorusGrid) -> SpectralField {
        let mbar = grid.uniform_density();
        let a = self.initial.amplitude;
        let k = self.initial.mode as f64;
        SpectralField::from_fn(grid, |x| mbar * (1.0 + a * (k * x[0]).cos()))
    }

    /// Canonical TOML of every numerical setting.
    pub fn canonical(&self) -> String {
        let mut numeric = self.clone();
        numeric.run = RunSection::default();
        toml::to_string(&numeric).expect("config serializes")
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex-encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
