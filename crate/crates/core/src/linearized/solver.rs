use std::io::{Read, Write};

use super::coefficients::FrozenCoefficients;
use crate::config::SolverConfig;
use crate::error::{DefectHistory, Error, Result};
use crate::mfg::{read_path, write_path, PathPair, TimeGrid};
use crate::model::PayoffSpec;
use crate::spectral::{DistributionalDatum, SpectralField};

/// Solution `(v, μ)` of the linearized system.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedPair {
    pub time_grid: TimeGrid,
    pub v_path: Vec<SpectralField>,
    pub mu_path: Vec<SpectralField>,
    pub datum: DistributionalDatum,
}

impl LinearizedPair {
    pub fn v0(&self) -> &SpectralField {
        &self.v_path[0]
    }

    /// Largest deviation of `μ̂(0, t)` from its initial value.
    pub fn mass_drift(&self) -> f64 {
        crate::mfg::mean_drift(&self.mu_path)
    }

    /// Writes the `v` path then the `μ` path in the path format.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_path(w, &self.time_grid, &self.v_path)?;
        write_path(w, &self.time_grid, &self.mu_path)
    }

    /// Reads a pair written by [`write`](Self::write); the datum becomes the smooth initial `μ`.
    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let (tg, v_path) = read_path(r)?;
        let (tm, mu_path) = read_path(r)?;
        if tg != tm {
            return Err(Error::Format("v and μ paths use different time grids".into()));
        }
        let datum = DistributionalDatum::ZeroMeanField(mu_path[0].clone());
        Ok(Self {
            time_grid: tg,
            v_path,
            mu_path,
            datum,
        })
    }
}

/// Iterations of one mollification stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageDiagnostics {
    pub eps: f64,
    pub iterations: usize,
    pub final_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearDiagnostics {
    pub stages: Vec<StageDiagnostics>,
}

impl LinearDiagnostics {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

struct Stepper<'a> {
    coeffs: &'a FrozenCoefficients,
    payoff: &'a PayoffSpec,
    g_prime: Vec<f64>,
    dt: f64,
    eps: f64,
}

impl Stepper<'_> {
    fn backward(&self, mu_path: &[SpectralField]) -> Result<Vec<SpectralField>> {
        let grid = &self.coeffs.grid;
        let n = self.coeffs.time_grid.n_steps();
        let mut v = vec![SpectralField::zeros(grid); n + 1];
        v[n] = self.payoff.dg_dm_refined(grid, &self.g_prime, &mu_path[n])?;
        let len = grid.refined_len();
        let mut src = vec![0.0; len];
        for step in (0..n).rev() {
            let node = &self.coeffs.nodes[step + 1];
            let grad: Vec<Vec<f64>> = v[step + 1].gradient().iter().map(|g| g.to_refined()).collect();
            let mu = mu_path[step + 1].to_refined();
            for j in 0..len {
                let mut acc = node.source[j] * mu[j];
                for (b, g) in node.drift.iter().zip(&grad) {
                    acc += b[j] * g[j];
                }
                src[j] = acc;
            }
            let s = SpectralField::from_refined(grid, &src)?.mollify(self.eps);
            let mut next = v[step + 1].clone();
            next.axpy(-self.dt, &s);
            let next = next.heat_propagate(self.dt);
            if !next.is_finite() {
                return Err(Error::BlowUp { step });
            }
            v[step] = next;
        }
        Ok(v)
    }

    fn forward(&self, v_path: &[SpectralField], mu0: &SpectralField) -> Result<Vec<SpectralField>> {
        let grid = &self.coeffs.grid;
        let d = grid.dim();
        let n = self.coeffs.time_grid.n_steps();
        let len = grid.refined_len();
        let mut mu = Vec::with_capacity(n + 1);
        mu.push(mu0.clone());
        let mut flux = vec![vec![0.0; len]; d];
        for step in 0..n {
            let node = &self.coeffs.nodes[step];
            let grad: Vec<Vec<f64>> = v_path[step].gradient().iter().map(|g| g.to_refined()).collect();
            let m = mu[step].to_refined();
            for (i, f) in flux.iter_mut().enumerate() {
                for j in 0..len {
                    let mut acc = m[j] * (node.drift[i][j] + node.cross[i][j]);
                    for (k, g) in grad.iter().enumerate() {
                        acc += node.diffusion[i * d + k][j] * g[j];
                    }
                    f[j] = acc;
                }
            }
            let comps = flux
                .iter()
                .map(|f| SpectralField::from_refined(grid, f))
                .collect::<Result<Vec<_>>>()?;
            let div = SpectralField::divergence(&comps)?.mollify(self.eps);
            let mut next = mu[step].clone();
            next.axpy(self.dt, &div);
            let next = next.heat_propagate(self.dt);
            if !next.is_finite() {
                return Err(Error::BlowUp { step: step + 1 });
            }
            mu.push(next);
        }
        Ok(mu)
    }
}

fn sup_norm_pair(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sobolev_norm(0.0) + y.sobolev_norm(0.0))
        .fold(0.0, f64::max)
}

/// Solves the linearized system around `base` for the initial perturbation `mu0`.
///
/// Backward: `v(T) = (δG/δm)(m_T)μ_T`,
/// `v̂_n = e^{−|k|²dt}(v̂_{n+1} − dt·J_ε P_n[D_pH·∇v + ∂_qH μ]_{n+1})`.
/// Forward: `μ_0 = J_ε μ0`,
/// `μ̂_{n+1} = e^{−|k|²dt}(μ̂_n + dt·J_ε ∇·P_n[μ D_pH + m D²_{pp}H ∇v + m D_p∂_qH μ]_n)`.
///
/// The damped Picard iteration runs once per mollifier width in the
/// configuration (shared tolerance), warm-started from the previous stage, and
/// finally unmollified to the relative tolerance `picard.linear_tol`. The
/// defect is relative: `sup_t(‖Δv‖ + ‖Δμ‖) / sup_t(‖v‖ + ‖μ‖)` in `L²`.
pub fn solve_linearized(
    coeffs: &FrozenCoefficients,
    payoff: &PayoffSpec,
    base: &PathPair,
    mu0: &DistributionalDatum,
    cfg: &SolverConfig,
) -> Result<(LinearizedPair, LinearDiagnostics)> {
    if base.time_grid != coeffs.time_grid || base.m_path[0].grid() != &coeffs.grid {
        return Err(Error::InvalidArgument(
            "coefficients were frozen on a different base solution".into(),
        ));
    }
    let grid = &coeffs.grid;
    let tg = coeffs.time_grid;
    let datum = mu0.synthesize(grid)?;
    let picard = &cfg.picard;
    let mut stepper = Stepper {
        coeffs,
        payoff,
        g_prime: payoff.g_prime_refined(base.m_terminal()),
        dt: tg.dt(),
        eps: 0.0,
    };

    let mut stages: Vec<(f64, f64)> = cfg
        .mollification
        .iter()
        .filter(|&&e| e > 0.0)
        .map(|&e| (e, picard.tol))
        .collect();
    stages.push((0.0, picard.linear_tol));

    let mut diagnostics = LinearDiagnostics::default();
    let mut mu_prev = vec![datum.mollify(stages[0].0); tg.len()];
    let mut result = None;
    for (eps, tol) in stages {
        stepper.eps = eps;
        let start = datum.mollify(eps);
        mu_prev[0] = start.clone();
        let mut v_prev: Option<Vec<SpectralField>> = None;
        let mut history = Vec::new();
        let mut done = None;
        for sweep in 1..=picard.max_iter {
            let v = stepper.backward(&mu_prev)?;
            let mu_new = stepper.forward(&v, &start)?;
            let mut mu_next: Vec<SpectralField> = if sweep == 1 {
                mu_new
            } else {
                mu_new
                    .iter()
                    .zip(&mu_prev)
                    .map(|(a, b)| a.blend(picard.damping, b))
                    .collect()
            };
            mu_next[0] = start.clone();
            if let Some(vp) = &v_prev {
                let num = v
                    .iter()
                    .zip(vp)
                    .zip(mu_next.iter().zip(&mu_prev))
                    .map(|((a, b), (c, e))| (a - b).sobolev_norm(0.0) + (c - e).sobolev_norm(0.0))
                    .fold(0.0, f64::max);
                let den = sup_norm_pair(&v, &mu_next);
                let defect = if num == 0.0 { 0.0 } else { num / den };
                history.push(defect);
                if defect <= tol {
                    diagnostics.stages.push(StageDiagnostics {
                        eps,
                        iterations: sweep - 1,
                        final_defect: defect,
                    });
                    done = Some(v);
                    break;
                }
                if !defect.is_finite() || defect > 1e12 {
                    break;
                }
            }
            v_prev = Some(v);
            mu_prev = mu_next;
        }
        match done {
            Some(v) => result = Some(v),
            None => {
                return Err(Error::NonConvergence(DefectHistory {
                    defects: history,
                    tolerance: tol,
                }))
            }
        }
    }
    let v_path = result.expect("final stage ran");
    Ok((
        LinearizedPair {
            time_grid: tg,
            v_path,
            mu_path: mu_prev,
            datum: mu0.clone(),
        },
        diagnostics,
    ))
}
