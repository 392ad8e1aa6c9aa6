//! Numerical checks of the structural assumptions on `H` and `G`.

use rand::Rng;

use super::fields::NodalState;
use super::hamiltonian::Hamiltonian;
use super::payoff::PayoffSpec;
use crate::error::{Error, Result};
use crate::report::{fmt_num, LinearFit, StudyReport, Verdict};
use crate::sampling;
use crate::spectral::{ensure_same_grid, SpectralField, TorusGrid};

/// Finite-difference step of the derivative check.
pub const FD_STEP: f64 = 1e-5;
/// Tolerance of the derivative check, relative to `max(1, |exact|)`.
pub const FD_TOLERANCE: f64 = 1e-6;
/// Minimum `ε`-slope of the Taylor remainders.
pub const REMAINDER_SLOPE_FLOOR: f64 = 1.9;

/// One corpus entry `(u, ũ, m, m̃)`.
#[derive(Clone, Debug)]
pub struct AuditSample {
    pub u: SpectralField,
    pub u_tilde: SpectralField,
    pub m: SpectralField,
    pub m_tilde: SpectralField,
}

/// Second-order Taylor remainders `(F₁, F₂)` of `H` and of the drift `div(m D_pH)`.
///
/// `F₁ = H(∇ũ, m̃) − H(∇u, m) − D_pH·∇(ũ−u) − ∂_qH (m̃−m)` and
/// `F₂ = div(m̃ D_pH̃) − div(m D_pH) − div((m̃−m) D_pH) − div(m D²_{pp}H ∇(ũ−u)) − div(m D_p∂_qH (m̃−m))`,
/// all derivatives taken at `(∇u, m)`.
pub fn taylor_remainders(
    ham: &dyn Hamiltonian,
    t: f64,
    sample: &AuditSample,
) -> Result<(SpectralField, SpectralField)> {
    let AuditSample { u, u_tilde, m, m_tilde } = sample;
    ensure_same_grid(u, m)?;
    ensure_same_grid(u_tilde, m_tilde)?;
    ensure_same_grid(u, u_tilde)?;
    let grid = u.grid().clone();
    let d = grid.dim();
    let base = NodalState::new(ham, u, m)?;
    let pert = NodalState::new(ham, u_tilde, m_tilde)?;

    let len = grid.refined_len();
    let mut f1 = vec![0.0; len];
    let mut flux = vec![vec![0.0; len]; d];
    let (mut b, mut bt, mut hess, mut cross) = (vec![0.0; d], vec![0.0; d], vec![0.0; d * d], vec![0.0; d]);
    let mut dp = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut pt = vec![0.0; d];
    for node in 0..len {
        let xs = grid.refined_node(node);
        let x = &xs[..d];
        for axis in 0..d {
            p[axis] = base.grad[axis][node];
            pt[axis] = pert.grad[axis][node];
            dp[axis] = pt[axis] - p[axis];
        }
        let (q, qt) = (base.q[node], pert.q[node]);
        let (mv, mt) = (base.m[node], pert.m[node]);
        let dm = mt - mv;
        ham.grad_p(t, x, &p, q, &mut b);
        ham.grad_p(t, x, &pt, qt, &mut bt);
        ham.hess_pp(t, x, &p, q, &mut hess);
        ham.cross_pq(t, x, &p, q, &mut cross);
        let hq = ham.d_q(t, x, &p, q);
        let lin: f64 = b.iter().zip(&dp).map(|(a, c)| a * c).sum::<f64>() + hq * dm;
        f1[node] = ham.value(t, x, &pt, qt) - ham.value(t, x, &p, q) - lin;
        for i in 0..d {
            let hd: f64 = (0..d).map(|j| hess[i * d + j] * dp[j]).sum();
            flux[i][node] = mt * bt[i] - mv * b[i] - dm * b[i] - mv * hd - mv * cross[i] * dm;
        }
        if !f1[node].is_finite() || flux.iter().any(|f| !f[node].is_finite()) {
            return Err(Error::NonlinearityDomain {
                node,
                inputs: p.iter().chain(&pt).cloned().chain([q, qt]).collect(),
                value: f1[node],
            });
        }
    }
    let f1 = SpectralField::from_refined(&grid, &f1)?;
    let flux = flux
        .iter()
        .map(|f| SpectralField::from_refined(&grid, f))
        .collect::<Result<Vec<_>>>()?;
    Ok((f1, SpectralField::divergence(&flux)?))
}

/// Result of comparing analytic derivatives with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub points: usize,
    pub max_error: f64,
    pub worst: String,
}

/// Compares every supplied derivative with central differences at random points.
///
/// Points are drawn with `p ∈ [-1,1]^d`, `q ∈ [0.05, 1]`, `x ∈ [0, 2π)^d`, `t ∈ [0, 1]`.
pub fn derivative_check<R: Rng>(
    ham: &dyn Hamiltonian,
    d: usize,
    points: usize,
    rng: &mut R,
) -> DerivativeCheck {
    let h = FD_STEP;
    let mut worst = (0.0f64, String::new());
    let mut record = |what: &str, fd: f64, exact: f64| {
        let err = (fd - exact).abs() / exact.abs().max(1.0);
        if err > worst.0 || !err.is_finite() {
            worst = (err, what.to_string());
        }
    };
    let (mut g, mut gp, mut gm, mut hess, mut cross) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d * d], vec![0.0; d]);
    for _ in 0..points {
        let t: f64 = rng.gen_range(0.0..1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: f64 = rng.gen_range(0.05..1.0);
        ham.grad_p(t, &x, &p, q, &mut g);
        ham.hess_pp(t, &x, &p, q, &mut hess);
        ham.cross_pq(t, &x, &p, q, &mut cross);
        for j in 0..d {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += h;
            pm[j] -= h;
            let fd = (ham.value(t, &x, &pp, q) - ham.value(t, &x, &pm, q)) / (2.0 * h);
            record("grad_p", fd, g[j]);
            ham.grad_p(t, &x, &pp, q, &mut gp);
            ham.grad_p(t, &x, &pm, q, &mut gm);
            for i in 0..d {
                record("hess_pp", (gp[i] - gm[i]) / (2.0 * h), hess[i * d + j]);
            }
        }
        let fd = (ham.value(t, &x, &p, q + h) - ham.value(t, &x, &p, q - h)) / (2.0 * h);
        record("d_q", fd, ham.d_q(t, &x, &p, q));
        ham.grad_p(t, &x, &p, q + h, &mut gp);
        ham.grad_p(t, &x, &p, q - h, &mut gm);
        for i in 0..d {
            record("cross_pq", (gp[i] - gm[i]) / (2.0 * h), cross[i]);
        }
        let fd = (ham.d_q(t, &x, &p, q + h) - ham.d_q(t, &x, &p, q - h)) / (2.0 * h);
        record("d_qq", fd, ham.d_qq(t, &x, &p, q));
    }
    DerivativeCheck {
        points,
        max_error: worst.0,
        worst: worst.1,
    }
}

/// Largest difference quotient of `H` and its derivatives up to order two over
/// random pairs in `[-bound, bound]^d × [0, bound]`, by derivative name.
pub fn lipschitz_constants<R: Rng>(
    ham: &dyn Hamiltonian,
    d: usize,
    bound: f64,
    pairs: usize,
    rng: &mut R,
) -> Vec<(String, f64)> {
    let names = ["value", "grad_p", "d_q", "hess_pp", "cross_pq", "d_qq"];
    let mut best = [0.0f64; 6];
    let eval = |t: f64, x: &[f64], p: &[f64], q: f64| -> Vec<Vec<f64>> {
        let mut g = vec![0.0; d];
        let mut hs = vec![0.0; d * d];
        let mut c = vec![0.0; d];
        ham.grad_p(t, x, p, q, &mut g);
        ham.hess_pp(t, x, p, q, &mut hs);
        ham.cross_pq(t, x, p, q, &mut c);
        vec![
            vec![ham.value(t, x, p, q)],
            g,
            vec![ham.d_q(t, x, p, q)],
            hs,
            c,
            vec![ham.d_qq(t, x, p, q)],
        ]
    };
    for _ in 0..pairs {
        let t: f64 = rng.gen_range(0.0..1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let p1: Vec<f64> = (0..d).map(|_| rng.gen_range(-bound..bound)).collect();
        let p2: Vec<f64> = (0..d).map(|_| rng.gen_range(-bound..bound)).collect();
        let q1: f64 = rng.gen_range(0.0..bound);
        let q2: f64 = rng.gen_range(0.0..bound);
        let dist: f64 = p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).sum::<f64>() + (q1 - q2).abs();
        if dist == 0.0 {
            continue;
        }
        let a = eval(t, &x, &p1, q1);
        let b = eval(t, &x, &p2, q2);
        for (k, (va, vb)) in a.iter().zip(&b).enumerate() {
            let diff = va.iter().zip(vb).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            best[k] = best[k].max(diff / dist);
        }
    }
    names.iter().map(|n| n.to_string()).zip(best).collect()
}

/// Fitted `ε`-slopes of `‖F₁‖_{H^r}` and `‖F₂‖_{H^{r−1}}` along `ũ = u + εφ`, `m̃ = m + εψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderSlopes {
    pub eps: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f1_fit: LinearFit,
    pub f2_fit: LinearFit,
}

pub fn remainder_slopes(
    ham: &dyn Hamiltonian,
    r: f64,
    u: &SpectralField,
    m: &SpectralField,
    phi: &SpectralField,
    psi: &SpectralField,
    eps: &[f64],
) -> Result<RemainderSlopes> {
    let mut f1 = Vec::with_capacity(eps.len());
    let mut f2 = Vec::with_capacity(eps.len());
    for &e in eps {
        let sample = AuditSample {
            u: u.clone(),
            u_tilde: u + &(phi * e),
            m: m.clone(),
            m_tilde: m + &(psi * e),
        };
        let (a, b) = taylor_remainders(ham, 0.0, &sample)?;
        f1.push(a.sobolev_norm(r));
        f2.push(b.sobolev_norm(r - 1.0));
    }
    let fit = |y: &[f64]| {
        LinearFit::log_log(eps, y).ok_or_else(|| Error::InvalidArgument("need two distinct ε values".into()))
    };
    Ok(RemainderSlopes {
        f1_fit: fit(&f1)?,
        f2_fit: fit(&f2)?,
        eps: eps.to_vec(),
        f1,
        f2,
    })
}

/// Audit parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    pub s: f64,
    pub r: f64,
    pub radius: f64,
    pub seed: u64,
    /// Random points for the derivative and Lipschitz checks.
    pub points: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            s: 6.0,
            r: 1.25,
            radius: 1.0,
            seed: 0,
            points: 100,
        }
    }
}

/// Random corpus with `‖m‖_{H^r}`, `‖u‖_{H^{r+1}}` well inside `radius`.
pub fn default_corpus(grid: &TorusGrid, count: usize, cfg: &AuditConfig) -> Vec<AuditSample> {
    let mut rng = sampling::rng(cfg.seed);
    (0..count)
        .map(|_| {
            let mut u = || {
                let f = sampling::random_zero_mean(grid, 4, 1.0, &mut rng);
                let norm = f.sobolev_norm(cfg.r + 1.0).max(f64::MIN_POSITIVE);
                f.scale(0.25 * cfg.radius / norm)
            };
            let (u, u_tilde) = (u(), u());
            let m = sampling::random_density(grid, 4, 0.3, &mut rng);
            let m_tilde = sampling::random_density(grid, 4, 0.3, &mut rng);
            AuditSample { u, u_tilde, m, m_tilde }
        })
        .collect()
}

/// Measures the constants of the remainder bounds, `κ`, `Υ`, the Lipschitz
/// constants and the derivative check, with pass/fail verdicts for the checks
/// that have fixed thresholds.
pub fn audit_assumptions(
    ham: &dyn Hamiltonian,
    payoff: &PayoffSpec,
    samples: &[AuditSample],
    cfg: &AuditConfig,
) -> Result<StudyReport> {
    let grid = samples
        .first()
        .map(|s| s.u.grid().clone())
        .ok_or_else(|| Error::InvalidArgument("audit corpus is empty".into()))?;
    let d = grid.dim();
    let r = cfg.r;
    for (index, smp) in samples.iter().enumerate() {
        for norm in [
            smp.u.sobolev_norm(r + 1.0),
            smp.u_tilde.sobolev_norm(r + 1.0),
            smp.m.sobolev_norm(r),
            smp.m_tilde.sobolev_norm(r),
        ] {
            if norm > cfg.radius {
                return Err(Error::AuditDomain {
                    index,
                    norm,
                    radius: cfg.radius,
                });
            }
        }
    }

    let mut report = StudyReport::new(
        "audit",
        "sample",
        &["f1_sq", "f1_constant", "f2_sq", "f2_constant", "kappa", "upsilon"],
    );
    report.meta("hamiltonian", ham.name());
    report.meta("s", fmt_num(cfg.s));
    report.meta("r", fmt_num(r));
    report.meta("radius", fmt_num(cfg.radius));
    report.meta("seed", cfg.seed);

    let (mut c1, mut c2, mut kappa, mut upsilon) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, smp) in samples.iter().enumerate() {
        let (f1, f2) = taylor_remainders(ham, 0.0, smp)?;
        let du = &smp.u_tilde - &smp.u;
        let dm = &smp.m_tilde - &smp.m;
        let f1_sq = f1.sobolev_norm_sq(r);
        let f2_sq = f2.sobolev_norm_sq(r - 1.0);
        let b1 = du.sobolev_norm(r + 1.0).powi(4) + dm.sobolev_norm(r).powi(4);
        let b2 = du.sobolev_norm(r).powi(4) + dm.sobolev_norm(r - 1.0).powi(4);
        let q1 = if b1 > 0.0 { f1_sq / b1 } else { 0.0 };
        let q2 = if b2 > 0.0 { f2_sq / b2 } else { 0.0 };
        let k = {
            let mu = dm.project_zero_mean();
            let den = mu.sobolev_norm(cfg.s - 1.0);
            if den > 0.0 {
                payoff.dg_dm_apply(&smp.m, &mu)?.sobolev_norm(cfg.s) / den
            } else {
                0.0
            }
        };
        let y = {
            let den = dm.sobolev_norm_sq(0.0);
            if den > 0.0 {
                (&payoff.g_eval(&smp.m_tilde)? - &payoff.g_eval(&smp.m)?).sobolev_norm_sq(1.0) / den
            } else {
                0.0
            }
        };
        c1 = c1.max(q1);
        c2 = c2.max(q2);
        kappa = kappa.max(k);
        upsilon = upsilon.max(y);
        report.push(i as f64, "corpus", vec![f1_sq, q1, f2_sq, q2, k, y]);
    }
    report.meta("f1_constant", fmt_num(c1));
    report.meta("f2_constant", fmt_num(c2));
    report.meta("kappa", fmt_num(kappa));
    report.meta("upsilon", fmt_num(upsilon));

    // zero increments must give vanishing remainders
    let first = &samples[0];
    let (z1, z2) = taylor_remainders(
        ham,
        0.0,
        &AuditSample {
            u: first.u.clone(),
            u_tilde: first.u.clone(),
            m: first.m.clone(),
            m_tilde: first.m.clone(),
        },
    )?;
    let zero = z1.sobolev_norm(r).max(z2.sobolev_norm(r - 1.0));
    report.verdicts.push(Verdict::at_most("zero_increment", zero, 0.0));

    let mut rng = sampling::rng(cfg.seed ^ 0x5eed);
    let phi = sampling::random_zero_mean(&grid, 3, 0.2, &mut rng);
    let psi = sampling::random_zero_mean(&grid, 3, 0.05, &mut rng);
    let eps: Vec<f64> = (2..=8).map(|j| 2f64.powi(-j)).collect();
    let slopes = remainder_slopes(ham, r, &first.u, &first.m, &phi, &psi, &eps)?;
    report.fits.push(("f1_eps".into(), slopes.f1_fit.clone()));
    report.fits.push(("f2_eps".into(), slopes.f2_fit.clone()));
    report
        .verdicts
        .push(Verdict::at_least("f1_slope", slopes.f1_fit.slope, REMAINDER_SLOPE_FLOOR));
    report
        .verdicts
        .push(Verdict::at_least("f2_slope", slopes.f2_fit.slope, REMAINDER_SLOPE_FLOOR));

    let check = derivative_check(ham, d, cfg.points, &mut rng);
    report.meta("derivative_check_worst", &check.worst);
    report
        .verdicts
        .push(Verdict::at_most("derivative_check", check.max_error, FD_TOLERANCE));
    for (name, c) in lipschitz_constants(ham, d, 2.0, cfg.points, &mut rng) {
        report.meta(&format!("lipschitz_{name}"), fmt_num(c));
    }
    report.meta("unchecked", "derivative bounds of order above three");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinHamiltonian;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 32).unwrap()
    }

    #[test]
    fn separable_remainder_is_half_gradient_square() {
        let g = grid();
        let u = SpectralField::from_fn(&g, |x| 0.1 * x[0].sin());
        let ut = SpectralField::from_fn(&g, |x| 0.1 * x[0].sin() + 0.05 * (2.0 * x[0]).cos());
        let m = SpectralField::from_fn(&g, |x| 0.16 + 0.02 * x[0].cos());
        let mt = SpectralField::from_fn(&g, |x| 0.16 - 0.03 * (3.0 * x[0]).sin());
        let (f1, f2) = taylor_remainders(
            &BuiltinHamiltonian::Separable,
            0.0,
            &AuditSample { u, u_tilde: ut, m, m_tilde: mt.clone() },
        )
        .unwrap();
        // ½|∂x(0.05 cos 2x)|² = 0.005 sin² 2x
        let expected = SpectralField::from_fn(&g, |x| 0.005 * (2.0 * x[0]).sin().powi(2));
        assert!((&f1 - &expected).sobolev_norm(0.0) < 1e-15);
        // drift remainder: div((m̃ − m) ∇(ũ − u))
        let expected2 = SpectralField::from_fn(&g, |x| {
            let dm = -0.03 * (3.0 * x[0]).sin() - 0.02 * x[0].cos();
            dm * (-0.1 * (2.0 * x[0]).sin())
        })
        .partial(0);
        assert!((&f2 - &expected2).sobolev_norm(0.0) < 1e-14);
    }

    #[test]
    fn catalog_passes_derivative_check() {
        for ham in BuiltinHamiltonian::catalog() {
            for d in 1..=2 {
                let c = derivative_check(&ham, d, 100, &mut sampling::rng(3));
                assert!(c.max_error <= FD_TOLERANCE, "{} d={d}: {c:?}", ham.name());
            }
        }
        let prod = BuiltinHamiltonian::Product {
            alpha: 0.3,
            p_coeffs: vec![0.0, 0.5, 0.1],
            q_coeffs: vec![1.0, 0.5, 0.2],
        };
        assert!(derivative_check(&prod, 2, 100, &mut sampling::rng(4)).max_error <= FD_TOLERANCE);
    }

    #[test]
    fn outside_radius_is_rejected() {
        let g = grid();
        let cfg = AuditConfig::default();
        let mut corpus = default_corpus(&g, 2, &cfg);
        corpus[1].u = corpus[1].u.scale(100.0);
        let err = audit_assumptions(&BuiltinHamiltonian::Separable, &PayoffSpec::default(), &corpus, &cfg)
            .unwrap_err();
        assert!(matches!(err, Error::AuditDomain { index: 1, .. }));
    }

    #[test]
    fn catalog_audit_verdicts() {
        let g = grid();
        let cfg = AuditConfig::default();
        let corpus = default_corpus(&g, 4, &cfg);
        for ham in BuiltinHamiltonian::catalog() {
            let rep = audit_assumptions(&ham, &PayoffSpec::default(), &corpus, &cfg).unwrap();
            assert!(rep.passed(), "{}", rep.summary());
            assert_eq!(rep.rows.len(), 4);
        }
    }
}
