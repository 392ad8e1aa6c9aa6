use super::path::PathPair;
use super::time::TimeGrid;
use crate::config::SolverConfig;
use crate::error::{DefectHistory, Error, Result};
use crate::model::{ClampCount, Hamiltonian, NodalState, PayoffSpec};
use crate::spectral::{ensure_same_grid, SpectralField};

/// Outcome of the fixed-point iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    /// Sweeps needed before the defect check passed; the confirming sweep is not counted.
    pub picard_iterations: usize,
    pub final_defect: f64,
    pub defect_history: Vec<f64>,
    pub clamp_fraction: f64,
    pub clamp_flagged: bool,
    pub converged: bool,
}

/// `e^{τΔ}`; multiplies `f̂(k)` by `e^{−|k|²τ}`.
pub fn heat_propagate(f: &SpectralField, tau: f64) -> Result<SpectralField> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative heat time {tau}")));
    }
    Ok(f.heat_propagate(tau))
}

/// `Ĥ(t, ∇u, m)`, dealiased.
pub(crate) fn hamiltonian_field(
    ham: &dyn Hamiltonian,
    t: f64,
    u: &SpectralField,
    m: &SpectralField,
) -> Result<(SpectralField, ClampCount)> {
    let state = NodalState::new(ham, u, m)?;
    let h = state.map(1, |x, p, q, _, out| out[0] = ham.value(t, x, p, q))?;
    Ok((SpectralField::from_refined(&state.grid, &h[0])?, state.clamp))
}

/// `∇·P_n[m D_pH(t, ∇u, m)]`; its mean mode is exactly zero.
pub(crate) fn drift_divergence(
    ham: &dyn Hamiltonian,
    t: f64,
    u: &SpectralField,
    m: &SpectralField,
) -> Result<(SpectralField, ClampCount)> {
    let (flux, clamp) = drift_flux(ham, t, u, m)?;
    Ok((SpectralField::divergence(&flux)?, clamp))
}

/// `P_n[m D_pH(t, ∇u, m)]`, one field per axis.
pub(crate) fn drift_flux(
    ham: &dyn Hamiltonian,
    t: f64,
    u: &SpectralField,
    m: &SpectralField,
) -> Result<(Vec<SpectralField>, ClampCount)> {
    let state = NodalState::new(ham, u, m)?;
    let d = state.grid.dim();
    let flux = state.map(d, |x, p, q, mv, out| {
        ham.grad_p(t, x, p, q, out);
        for o in out.iter_mut() {
            *o *= mv;
        }
    })?;
    let fields = flux
        .iter()
        .map(|f| SpectralField::from_refined(&state.grid, f))
        .collect::<Result<Vec<_>>>()?;
    Ok((fields, state.clamp))
}

/// One forward step `m ↦ e^{dtΔ}(m + dt ∇·P_n[m D_pH(t, ∇u, m)])`.
pub(crate) fn fp_step(
    ham: &dyn Hamiltonian,
    t: f64,
    dt: f64,
    u: &SpectralField,
    m: &SpectralField,
) -> Result<(SpectralField, ClampCount)> {
    let (div, clamp) = drift_divergence(ham, t, u, m)?;
    let mut next = m.clone();
    next.axpy(dt, &div);
    Ok((next.heat_propagate(dt), clamp))
}

/// Backward Lawson–Euler sweep for the value function given a density path.
///
/// `u(T) = G(·, m_T)` and `û_n = e^{−|k|²dt}(û_{n+1} − dt·Ĥ(t_{n+1}, ∇u_{n+1}, m_{n+1}))`.
pub fn hjb_backward_sweep(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m_path: &[SpectralField],
    time_grid: &TimeGrid,
) -> Result<(Vec<SpectralField>, ClampCount)> {
    check_path_len(m_path, time_grid)?;
    let n = time_grid.n_steps();
    let dt = time_grid.dt();
    let mut clamp = ClampCount::default();
    let mut u = vec![SpectralField::zeros(m_path[0].grid()); n + 1];
    u[n] = payoff.g_eval(&m_path[n])?;
    if !u[n].is_finite() {
        return Err(Error::BlowUp { step: n });
    }
    for step in (0..n).rev() {
        let (h, c) = hamiltonian_field(ham, time_grid.time(step + 1), &u[step + 1], &m_path[step + 1])?;
        clamp.merge(c);
        let mut next = u[step + 1].clone();
        next.axpy(-dt, &h);
        let next = next.heat_propagate(dt);
        if !next.is_finite() {
            return Err(Error::BlowUp { step });
        }
        u[step] = next;
    }
    Ok((u, clamp))
}

/// Forward Lawson–Euler sweep for the density given a value path.
pub fn fp_forward_sweep(
    ham: &dyn Hamiltonian,
    u_path: &[SpectralField],
    m0: &SpectralField,
    time_grid: &TimeGrid,
) -> Result<(Vec<SpectralField>, ClampCount)> {
    check_path_len(u_path, time_grid)?;
    ensure_same_grid(&u_path[0], m0)?;
    let dt = time_grid.dt();
    let mut clamp = ClampCount::default();
    let mut m = Vec::with_capacity(time_grid.len());
    m.push(m0.clone());
    for step in 0..time_grid.n_steps() {
        let (next, c) = fp_step(ham, time_grid.time(step), dt, &u_path[step], &m[step])?;
        clamp.merge(c);
        if !next.is_finite() {
            return Err(Error::BlowUp { step: step + 1 });
        }
        m.push(next);
    }
    Ok((m, clamp))
}

fn check_path_len(path: &[SpectralField], time_grid: &TimeGrid) -> Result<()> {
    if path.len() != time_grid.len() {
        return Err(Error::Shape {
            expected: time_grid.len(),
            actual: path.len(),
        });
    }
    Ok(())
}

/// Rejects initial densities that are complex, of wrong mass or outside the ball `𝒬_R`.
pub fn check_initial_density(m0: &SpectralField, cfg: &SolverConfig) -> Result<()> {
    let scale = m0.sobolev_norm(0.0).max(1.0);
    if !m0.is_finite() || !m0.is_hermitian(1e-12 * scale) {
        return Err(Error::InvalidArgument("initial density must be real and finite".into()));
    }
    let mass = m0.mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Mass { mass });
    }
    let mbar = SpectralField::constant(m0.grid(), m0.grid().uniform_density());
    let distance = (m0 - &mbar).sobolev_norm(cfg.s);
    if distance > cfg.radius {
        return Err(Error::OutsideBall {
            distance,
            radius: cfg.radius,
        });
    }
    Ok(())
}

/// Solves the forward–backward system by damped Picard iteration.
///
/// Starts from the frozen density path `m ≡ m0`. Each sweep solves the value
/// equation backward on the current density path, then the density forward;
/// the new density path is blended as `θ·m_new + (1−θ)·m_old` (the first sweep
/// is taken undamped). The returned pair is the last density path together
/// with the value function solved on it, so the value equation and terminal
/// condition hold exactly and the density equation to the tolerance.
pub fn solve_mfg(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<(PathPair, SolveDiagnostics)> {
    check_initial_density(m0, cfg)?;
    let picard = &cfg.picard;
    let s = cfg.s;
    let mut m_prev = vec![m0.clone(); time_grid.len()];
    let mut u_prev: Option<Vec<SpectralField>> = None;
    let mut history = Vec::new();
    for sweep in 1..=picard.max_iter {
        let (u, c_u) = hjb_backward_sweep(ham, payoff, &m_prev, time_grid)?;
        let (m_new, c_m) = fp_forward_sweep(ham, &u, m0, time_grid)?;
        let mut m_next: Vec<SpectralField> = if sweep == 1 {
            m_new
        } else {
            m_new
                .iter()
                .zip(&m_prev)
                .map(|(a, b)| a.blend(picard.damping, b))
                .collect()
        };
        m_next[0] = m0.clone();
        if let Some(up) = &u_prev {
            let defect = u
                .iter()
                .zip(up)
                .zip(m_next.iter().zip(&m_prev))
                .map(|((a, b), (c, e))| (a - b).sobolev_norm(s) + (c - e).sobolev_norm(s - 1.0))
                .fold(0.0, f64::max);
            history.push(defect);
            if defect <= picard.tol {
                let mut clamp = c_u;
                clamp.merge(c_m);
                let diagnostics = SolveDiagnostics {
                    picard_iterations: sweep - 1,
                    final_defect: defect,
                    defect_history: history,
                    clamp_fraction: clamp.fraction(),
                    clamp_flagged: clamp.flagged(),
                    converged: true,
                };
                let pair = PathPair {
                    time_grid: *time_grid,
                    u_path: u,
                    m_path: m_prev,
                };
                return Ok((pair, diagnostics));
            }
            if !defect.is_finite() || defect > 1e12 {
                break;
            }
        }
        u_prev = Some(u);
        m_prev = m_next;
    }
    Err(Error::NonConvergence(DefectHistory {
        defects: history,
        tolerance: picard.tol,
    }))
}
