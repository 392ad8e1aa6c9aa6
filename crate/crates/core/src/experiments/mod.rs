//! Parameter sweeps measuring the quantitative estimates of the theory.

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::Result;
use crate::linearized::{freeze_coefficients, negative_norm_trace, solve_linearized, FrozenCoefficients, LinearizedPair};
use crate::master::{derivative_columns, Kernel};
use crate::mfg::{solve_mfg, PathPair, TimeGrid};
use crate::model::{Hamiltonian, PayoffSpec};
use crate::report::{fmt_num, spread, LinearFit, Outcome, StudyReport, Verdict};
use crate::spectral::{DistributionalDatum, SpectralField, TorusGrid};

/// Lowest fitted Taylor slope accepted (`5/4 − 0.05`).
pub const TAYLOR_SLOPE_FLOOR: f64 = 1.2;
/// Fits with a lower coefficient of determination are inconclusive.
pub const MIN_R_SQUARED: f64 = 0.98;
/// Remainders below this multiple of the Picard tolerance are left out of fits.
pub const NOISE_FLOOR_FACTOR: f64 = 100.0;

/// `scale·(cos x₁ + ½ cos(2x₁ + 1))`, zero-mean.
pub fn default_direction(grid: &TorusGrid, scale: f64) -> SpectralField {
    SpectralField::from_fn(grid, |x| scale * (x[0].cos() + 0.5 * (2.0 * x[0] + 1.0).cos()))
        .project_zero_mean()
}

fn sup_over_path(a: &[SpectralField], l: f64) -> f64 {
    a.iter().map(|f| f.sobolev_norm(l)).fold(0.0, f64::max)
}

fn fit_verdict(name: &str, fit: Option<&LinearFit>, floor: f64) -> Verdict {
    match fit {
        Some(f) if f.r_squared >= MIN_R_SQUARED => Verdict::at_least(name, f.slope, floor),
        Some(f) => Verdict {
            name: name.into(),
            outcome: Outcome::Inconclusive,
            measured: f.slope,
            rule: format!(">= {} with r2 >= {} (r2 = {})", fmt_num(floor), MIN_R_SQUARED, fmt_num(f.r_squared)),
            threshold: floor,
        },
        None => Verdict {
            name: name.into(),
            outcome: Outcome::Inconclusive,
            measured: f64::NAN,
            rule: format!(">= {} (fewer than two points in the fit window)", fmt_num(floor)),
            threshold: floor,
        },
    }
}

/// Remainder `z = ũ − u − v` of the first-order expansion along `m0 + εχ`.
///
/// For every `ε` the MFG system is solved from `m0 + εχ`; `u` and the
/// linearized `v[χ]` are solved once and `v[εχ] = ε·v[χ]` by linearity. Reports
/// `sup_t ‖z‖_{H^r}` against `‖εχ‖_{H^{−1}}` and `‖εχ‖_{H^s}` with log-log fits.
/// The fit window drops the largest `ε` and every point where `‖z‖` is below
/// `100 ×` the Picard tolerance.
pub fn taylor_rate_study(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    chi: &SpectralField,
    eps_list: &[f64],
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<StudyReport> {
    let r = cfg.r;
    let (base, _) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    let coeffs = freeze_coefficients(ham, &base)?;
    let chi = chi.project_zero_mean();
    let (lin, _) = solve_linearized(
        &coeffs,
        payoff,
        &base,
        &DistributionalDatum::ZeroMeanField(chi.clone()),
        cfg,
    )?;
    let mut report = StudyReport::new(
        "taylor_rate",
        "eps",
        &["z_sup_hr", "control_hminus1", "control_hs", "terminal_identity_defect"],
    );
    report.meta("hamiltonian", ham.name());
    report.meta("r", fmt_num(r));
    report.meta("s", fmt_num(cfg.s));
    report.meta("picard_tol", fmt_num(cfg.picard.tol));

    let n = time_grid.n_steps();
    let rows: Vec<(f64, Result<Vec<f64>>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let row = (|| {
                let m_tilde = m0 + &(&chi * eps);
                let (pert, _) = solve_mfg(ham, payoff, &m_tilde, time_grid, cfg)?;
                let z: Vec<SpectralField> = (0..=n)
                    .map(|k| {
                        let mut z = &pert.u_path[k] - &base.u_path[k];
                        z.axpy(-eps, &lin.v_path[k]);
                        z
                    })
                    .collect();
                let mut identity = &payoff.g_eval(pert.m_terminal())? - &payoff.g_eval(base.m_terminal())?;
                identity.axpy(
                    -eps,
                    &payoff.dg_dm_apply(base.m_terminal(), &lin.mu_path[n])?,
                );
                let identity_defect = (&z[n] - &identity).sobolev_norm(r);
                let control = &chi * eps;
                Ok(vec![
                    sup_over_path(&z, r),
                    control.sobolev_norm(-1.0),
                    control.sobolev_norm(cfg.s),
                    identity_defect,
                ])
            })();
            (eps, row)
        })
        .collect();
    for (eps, row) in rows {
        match row {
            Ok(values) => report.push(eps, "eps", values),
            Err(e) => report.push_failure(eps, "eps", &e.to_string()),
        }
    }
    report.sort_rows();

    let largest = report
        .rows
        .iter()
        .filter(|row| row.status == "ok")
        .map(|row| row.parameter)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = NOISE_FLOOR_FACTOR * cfg.picard.tol;
    let window: Vec<&crate::report::Row> = report
        .rows
        .iter()
        .filter(|row| row.status == "ok" && row.parameter < largest && row.values[0] >= floor)
        .collect();
    let z: Vec<f64> = window.iter().map(|row| row.values[0]).collect();
    let hm1: Vec<f64> = window.iter().map(|row| row.values[1]).collect();
    let hs: Vec<f64> = window.iter().map(|row| row.values[2]).collect();
    report.meta(
        "fit_window",
        window.iter().map(|row| fmt_num(row.parameter)).collect::<Vec<_>>().join(" "),
    );
    let fit_m1 = LinearFit::log_log(&hm1, &z);
    let fit_s = LinearFit::log_log(&hs, &z);
    report
        .verdicts
        .push(fit_verdict("slope_hminus1", fit_m1.as_ref(), TAYLOR_SLOPE_FLOOR));
    report
        .verdicts
        .push(fit_verdict("slope_hs", fit_s.as_ref(), TAYLOR_SLOPE_FLOOR));
    if let Some(f) = fit_m1 {
        report.fits.push(("z_vs_hminus1".into(), f));
    }
    if let Some(f) = fit_s {
        report.fits.push(("z_vs_hs".into(), f));
    }
    Ok(report)
}

/// `sup_t(‖Δu‖²_{H¹} + ‖Δm‖²_{L²})` between two solutions.
pub fn stability_numerator(a: &PathPair, b: &PathPair) -> f64 {
    a.u_path
        .iter()
        .zip(&b.u_path)
        .zip(a.m_path.iter().zip(&b.m_path))
        .map(|((u1, u2), (m1, m2))| (u1 - u2).sobolev_norm_sq(1.0) + (m1 - m2).sobolev_norm_sq(0.0))
        .fold(0.0, f64::max)
}

/// Stability quotients along the shrinking family `m0 + 2^{−j}χ`.
pub fn stability_study(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    chi: &SpectralField,
    js: &[i32],
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
    spread_threshold: f64,
) -> Result<StudyReport> {
    let (base, _) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    let chi = chi.project_zero_mean();
    let mut report = StudyReport::new("stability", "j", &["delta_l2_sq", "numerator", "ratio"]);
    report.meta("hamiltonian", ham.name());
    let rows: Vec<(i32, Result<Vec<f64>>)> = js
        .par_iter()
        .map(|&j| {
            let row = (|| {
                let delta = chi.scale(2f64.powi(-j));
                let (other, _) = solve_mfg(ham, payoff, &(m0 + &delta), time_grid, cfg)?;
                let den = delta.sobolev_norm_sq(0.0);
                let num = stability_numerator(&base, &other);
                Ok(vec![den, num, if den > 0.0 { num / den } else { f64::NAN }])
            })();
            (j, row)
        })
        .collect();
    for (j, row) in rows {
        match row {
            Ok(v) => report.push(j as f64, "pair", v),
            Err(e) => report.push_failure(j as f64, "pair", &e.to_string()),
        }
    }
    report.sort_rows();
    let ratios: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.status == "ok" && r.values[2].is_finite())
        .map(|r| r.values[2])
        .collect();
    report.meta("max_ratio", fmt_num(ratios.iter().cloned().fold(0.0, f64::max)));
    let failed = report.failed_rows();
    report
        .verdicts
        .push(Verdict::at_most("ratio_spread", spread(&ratios), spread_threshold));
    report
        .verdicts
        .push(Verdict::at_most("failed_rows", failed as f64, 0.0));
    Ok(report)
}

/// Initial perturbations of the negative-norm study.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyMember {
    /// `e^{ik x₁}`, measured through its real and imaginary parts.
    Mode(i64),
    Dirac(Vec<f64>),
    DiracGradient(Vec<f64>, usize),
    Zero,
}

impl FamilyMember {
    fn label(&self) -> String {
        let coords = |y: &[f64]| y.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" ");
        match self {
            Self::Mode(k) => format!("mode k={k}"),
            Self::Dirac(y) => format!("dirac y=({})", coords(y)),
            Self::DiracGradient(y, a) => format!("dirac_gradient axis={a} y=({})", coords(y)),
            Self::Zero => "zero".into(),
        }
    }
}

/// The family `{e^{ikx}: k = 2..=k_max} ∪ {δ_y: `probes` equispaced points}`.
pub fn default_family(k_max: i64, probes: usize) -> Vec<FamilyMember> {
    let mut family: Vec<FamilyMember> = (2..=k_max).map(FamilyMember::Mode).collect();
    family.extend((0..probes).map(|j| {
        FamilyMember::Dirac(vec![std::f64::consts::TAU * j as f64 / probes as f64])
    }));
    family
}

fn trace_values(
    coeffs: &FrozenCoefficients,
    payoff: &PayoffSpec,
    base: &PathPair,
    member: &FamilyMember,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let s = cfg.s;
    let grid = base.m_path[0].grid();
    let solve = |datum: DistributionalDatum| -> Result<LinearizedPair> {
        Ok(solve_linearized(coeffs, payoff, base, &datum, cfg)?.0)
    };
    match member {
        FamilyMember::Mode(k) => {
            let k = *k as f64;
            let re = solve(DistributionalDatum::ZeroMeanField(SpectralField::from_fn(grid, |x| (k * x[0]).cos())))?;
            let im = solve(DistributionalDatum::ZeroMeanField(SpectralField::from_fn(grid, |x| (k * x[0]).sin())))?;
            let combined = |a: &[SpectralField], b: &[SpectralField], l: f64| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x.sobolev_norm_sq(l) + y.sobolev_norm_sq(l)).sqrt())
                    .fold(0.0, f64::max)
            };
            let sup_v = combined(&re.v_path, &im.v_path, -s);
            let sup_mu = combined(&re.mu_path, &im.mu_path, -s - 1.0);
            let mu0 = combined(&re.mu_path[..1], &im.mu_path[..1], -s - 1.0);
            let tr_re = negative_norm_trace(&re, s);
            let tr_im = negative_norm_trace(&im, s);
            Ok(vec![
                sup_v,
                sup_mu,
                mu0,
                sup_v / mu0,
                sup_mu / mu0,
                tr_re.grad_v_integral + tr_im.grad_v_integral,
                tr_re.grad_mu_integral + tr_im.grad_mu_integral,
            ])
        }
        FamilyMember::Dirac(y) => Ok(negative_norm_trace(&solve(DistributionalDatum::DiracAt(y.clone()))?, s).values()),
        FamilyMember::DiracGradient(y, a) => {
            Ok(negative_norm_trace(&solve(DistributionalDatum::DiracGradientAt(y.clone(), *a))?, s).values())
        }
        FamilyMember::Zero => Ok(negative_norm_trace(
            &solve(DistributionalDatum::ZeroMeanField(SpectralField::zeros(grid)))?,
            s,
        )
        .values()),
    }
}

/// Whether the mode ratios, in increasing `k`, never decrease and end above where they start.
pub fn monotone_growth(ratios: &[f64]) -> bool {
    ratios.len() >= 2
        && ratios.windows(2).all(|w| w[1] >= w[0])
        && ratios.last() > ratios.first()
}

/// `sup_t‖v‖_{H^{−s}} / ‖μ₀‖_{H^{−s−1}}` across a datum family, with spread and growth verdicts.
pub fn hminus_bound_study(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    m0: &SpectralField,
    family: &[FamilyMember],
    time_grid: &TimeGrid,
    cfg: &SolverConfig,
    spread_threshold: f64,
) -> Result<StudyReport> {
    let (base, _) = solve_mfg(ham, payoff, m0, time_grid, cfg)?;
    let coeffs = freeze_coefficients(ham, &base)?;
    let mut report = StudyReport::new(
        "hminus_bound",
        "index",
        &crate::linearized::NegativeNormTrace::COLUMNS,
    );
    report.meta("hamiltonian", ham.name());
    report.meta("s", fmt_num(cfg.s));
    report.meta("ratio_sentinel", "NaN marks a vanishing datum");
    let rows: Vec<Result<Vec<f64>>> = family
        .par_iter()
        .map(|member| trace_values(&coeffs, payoff, &base, member, cfg))
        .collect();
    for (i, (member, row)) in family.iter().zip(rows).enumerate() {
        match row {
            Ok(v) => report.push(i as f64, &member.label(), v),
            Err(e) => report.push_failure(i as f64, &member.label(), &e.to_string()),
        }
    }
    let ratios: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.status == "ok" && r.values[3].is_finite())
        .map(|r| r.values[3])
        .collect();
    let mut modes: Vec<(i64, f64)> = family
        .iter()
        .zip(&report.rows)
        .filter_map(|(m, r)| match m {
            FamilyMember::Mode(k) if r.status == "ok" => Some((*k, r.values[3])),
            _ => None,
        })
        .collect();
    modes.sort_by_key(|(k, _)| *k);
    let mode_ratios: Vec<f64> = modes.iter().map(|(_, r)| *r).collect();
    report.meta(
        "max_ratio",
        fmt_num(ratios.iter().cloned().fold(0.0, f64::max)),
    );
    report.meta(
        "min_ratio",
        fmt_num(ratios.iter().cloned().fold(f64::INFINITY, f64::min)),
    );
    let failed = report.failed_rows();
    report
        .verdicts
        .push(Verdict::at_most("ratio_spread", spread(&ratios), spread_threshold));
    report.verdicts.push(Verdict::at_most(
        "monotone_growth_in_k",
        monotone_growth(&mode_ratios) as u8 as f64,
        0.0,
    ));
    report
        .verdicts
        .push(Verdict::at_most("failed_rows", failed as f64, 0.0));
    Ok(report)
}

/// Difference quotients over adjacent probes of `K`, `∇_yK` and `D²_{yy}K`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzQuotients {
    pub kernel: Vec<f64>,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// Quotients `‖F(·, y + h e_a) − F(·, y)‖_{H^{−s}} / h` with `h = 2π/n`, over
/// every probe and axis (periodic neighbours). Gradient and Hessian families
/// take the largest component.
pub fn lipschitz_quotients(kernel: &Kernel, s: f64) -> Result<LipschitzQuotients> {
    let grid = kernel.grid().clone();
    let d = grid.dim();
    let h = grid.spacing();
    let grads: Vec<Vec<SpectralField>> = (0..d)
        .map(|a| derivative_columns(kernel, |f| f.partial(a)))
        .collect::<Result<_>>()?;
    let mut hess = Vec::new();
    for a in 0..d {
        for b in a..d {
            hess.push(derivative_columns(kernel, |f| f.partial(a).partial(b))?);
        }
    }
    let quotient = |cols: &[SpectralField]| -> Vec<f64> {
        let mut out = Vec::with_capacity(cols.len() * d);
        for j in 0..cols.len() {
            for axis in 0..d {
                let next = neighbour(&grid, j, axis);
                out.push((&cols[next] - &cols[j]).sobolev_norm(-s) / h);
            }
        }
        out
    };
    let family_max = |families: &[Vec<SpectralField>]| -> Vec<f64> {
        let per: Vec<Vec<f64>> = families.iter().map(|c| quotient(c)).collect();
        (0..per[0].len())
            .map(|i| per.iter().map(|p| p[i]).fold(0.0, f64::max))
            .collect()
    };
    Ok(LipschitzQuotients {
        kernel: quotient(&kernel.columns),
        gradient: family_max(&grads),
        hessian: family_max(&hess),
    })
}

fn neighbour(grid: &TorusGrid, flat: usize, axis: usize) -> usize {
    let n = grid.n();
    let d = grid.dim();
    let stride = n.pow((d - 1 - axis) as u32);
    let digit = (flat / stride) % n;
    let next = (digit + 1) % n;
    flat - digit * stride + next * stride
}

/// Lipschitz quotients of the kernel and its first two `y`-derivatives, with spread verdicts.
pub fn kernel_regularity_study(kernel: &Kernel, s: f64, spread_threshold: f64) -> Result<StudyReport> {
    let q = lipschitz_quotients(kernel, s)?;
    let d = kernel.grid().dim();
    let mut report = StudyReport::new(
        "kernel_regularity",
        "pair",
        &["quotient_k", "quotient_grad", "quotient_hess"],
    );
    report.meta("s", fmt_num(s));
    report.meta("n", kernel.grid().n());
    for i in 0..q.kernel.len() {
        let (j, axis) = (i / d, i % d);
        report.push(
            i as f64,
            &format!("probe={j} axis={axis}"),
            vec![q.kernel[i], q.gradient[i], q.hessian[i]],
        );
    }
    for (name, fam) in [("k", &q.kernel), ("grad", &q.gradient), ("hess", &q.hessian)] {
        report.meta(&format!("max_quotient_{name}"), fmt_num(fam.iter().cloned().fold(0.0, f64::max)));
        report.verdicts.push(Verdict::at_most(
            &format!("spread_{name}"),
            spread(fam),
            spread_threshold,
        ));
    }
    Ok(report)
}

/// Compares the largest quotients of a coarse and a refined kernel; passes when
/// each refined maximum stays within `tolerance ×` the coarse one.
pub fn refinement_verdicts(coarse: &StudyReport, fine: &StudyReport, tolerance: f64) -> Vec<Verdict> {
    ["quotient_k", "quotient_grad", "quotient_hess"]
        .iter()
        .map(|col| {
            let max = |r: &StudyReport| {
                r.column(col)
                    .unwrap_or_default()
                    .into_iter()
                    .fold(0.0, f64::max)
            };
            let (c, f) = (max(coarse), max(fine));
            let ratio = if c == 0.0 && f == 0.0 { 1.0 } else { f / c };
            Verdict::at_most(&format!("refinement_{col}"), ratio, tolerance)
        })
        .collect()
}
