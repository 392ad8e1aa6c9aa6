//! The master function `U(t0, x, m0) = u(t0, x)`, its measure derivative and the
//! pointwise residual of the master equation.

mod kernel;

pub use kernel::{
    extract_kernel, full_grid_probes, kernel_from_base, wasserstein_gradient, Kernel, Probes,
    WassersteinGradient, KERNEL_MAGIC, KERNEL_VERSION,
};
pub(crate) use kernel::derivative_columns;

use crate::config::SolverConfig;
use crate::error::Result;
use crate::linearized::freeze_coefficients;
use crate::mfg::{drift_flux, fp_step, hamiltonian_field, solve_mfg, PathPair, SolveDiagnostics, TimeGrid};
use crate::model::{Hamiltonian, PayoffSpec};
use crate::spectral::SpectralField;

/// `U(t0, ·, m0)` together with the trajectory it was read from.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterEvaluation {
    pub t0: f64,
    pub m0: SpectralField,
    pub u0: SpectralField,
    pub base: PathPair,
    pub diagnostics: SolveDiagnostics,
}

/// Solves the MFG system on `time_grid` from `m0` and reads off the initial slice.
pub fn evaluate_master(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<MasterEvaluation> {
    let (base, diagnostics) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    Ok(MasterEvaluation {
        t0: time_grid.t0(),
        m0: m0.clone(),
        u0: base.u_path[0].clone(),
        base,
        diagnostics,
    })
}

/// Terms of the master equation at `(t0, ·, m0)` and their signed sum.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterResidual {
    /// `−∂_tU − ΔU + H − ∫Δ_yK m0 dy + ∫∇_yK·(m0 D_pH) dy`.
    pub field: SpectralField,
    /// Largest nodal magnitude of `field`.
    pub sup_norm: f64,
    /// One-sided difference `(U(t0+h) − U(t0))/h` with `h = dt`.
    pub time_derivative: SpectralField,
    pub laplacian: SpectralField,
    pub hamiltonian: SpectralField,
    /// `∫ Δ_y K(·, y) m0(y) dy`.
    pub diffusion_term: SpectralField,
    /// `∫ ∇_y K(·, y) · m0(y) D_pH(t0, y, ∇U(y), m0(y)) dy`.
    pub drift_term: SpectralField,
}

/// Evaluates the master equation residual at `(t0, ·, m0)`.
///
/// `∂_tU` re-solves from the same `m0` on `[t0 + dt, T]` with the same step. The
/// nonlocal integrals use the full-grid kernel and the trapezoid rule; the drift
/// density `m0 D_pH` is the dealiased product used by the density equation.
pub fn master_residual(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<MasterResidual> {
    let eval = evaluate_master(ham, payoff, m0, time_grid, cfg)?;
    let coeffs = freeze_coefficients(ham, &eval.base)?;
    let kernel = kernel_from_base(&coeffs, payoff, &eval.base, &Probes::FullGrid, cfg)?;
    let shifted = evaluate_master(ham, payoff, m0, &time_grid.shifted(1)?, cfg)?;
    residual_from_parts(ham, &eval, &shifted.u0, time_grid.dt(), &kernel)
}

fn residual_from_parts(
    ham: &dyn Hamiltonian,
    eval: &MasterEvaluation,
    u_shifted: &SpectralField,
    h: f64,
    kernel: &Kernel,
) -> Result<MasterResidual> {
    let grid = eval.m0.grid();
    let t0 = eval.t0;
    let u = &eval.u0;
    let time_derivative = (u_shifted - u).scale(1.0 / h);
    let laplacian = u.laplacian();
    let (hamiltonian, _) = hamiltonian_field(ham, t0, u, &eval.m0)?;

    let wg = wasserstein_gradient(kernel)?;
    let w = grid.cell_volume();
    let ny = grid.len();
    let m_nodes = eval.m0.synthesize();
    let (flux, _) = drift_flux(ham, t0, u, &eval.m0)?;
    let flux_nodes: Vec<Vec<f64>> = flux.iter().map(|f| f.synthesize()).collect();
    let mut diffusion = vec![0.0; grid.len()];
    let mut drift = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let row = i * ny;
        diffusion[i] = w * (0..ny).map(|j| wg.divergence[row + j] * m_nodes[j]).sum::<f64>();
        drift[i] = w * wg
            .grad
            .iter()
            .zip(&flux_nodes)
            .map(|(g, f)| (0..ny).map(|j| g[row + j] * f[j]).sum::<f64>())
            .sum::<f64>();
    }
    let diffusion_term = SpectralField::analyze(grid, &diffusion)?;
    let drift_term = SpectralField::analyze(grid, &drift)?;

    let mut field = -&time_derivative;
    field.axpy(-1.0, &laplacian);
    field.add_assign(&hamiltonian);
    field.axpy(-1.0, &diffusion_term);
    field.add_assign(&drift_term);
    let sup_norm = field.sup_norm();
    Ok(MasterResidual {
        field,
        sup_norm,
        time_derivative,
        laplacian,
        hamiltonian,
        diffusion_term,
        drift_term,
    })
}

/// Follows the density flow driven by `U` itself and compares `U(t, ·, m_t)` with
/// the base value function: returns `sup_t ‖U(t, ·, m_t) − u(t, ·)‖_{H^1}`.
///
/// At each node the MFG system is re-solved from `(t_n, m_n)`; the density then
/// takes one forward step with the drift `D_pH(t_n, ∇U(t_n, ·, m_n), m_n)`.
pub fn uniqueness_consistency(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (base, _) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    let dt = time_grid.dt();
    let n = time_grid.n_steps();
    let mut m = m0.clone();
    let mut defect = 0.0f64;
    for step in 0..n {
        let u = evaluate_master(ham, payoff, &m, &time_grid.shifted(step)?, cfg)?.u0;
        defect = defect.max((&u - &base.u_path[step]).sobolev_norm(1.0));
        m = fp_step(ham, time_grid.time(step), dt, &u, &m)?.0;
    }
    let terminal = payoff.g_eval(&m)?;
    Ok(defect.max((&terminal - &base.u_path[n]).sobolev_norm(1.0)))
}
