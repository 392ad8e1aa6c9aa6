//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs at desk scale (d = 1, n = 64, 200 steps, horizon 0.1). The process
//! exits non-zero only when `ACCEPTANCE_STRICT` is set, so a failed
//! criterion is reported without aborting the rest of the workspace tests.
//! Pass a criterion number (or several) as arguments to run a subset.

use std::time::Instant;

use torus_mfg::experiments::{
    default_direction, default_family, hminus_bound_study, kernel_regularity_study,
    refinement_verdicts, stability_study, taylor_rate_study,
};
use torus_mfg::linearized::{freeze_coefficients, solve_linearized, FrozenCoefficients, LinearizedPair};
use torus_mfg::master::{kernel_from_base, master_residual, Kernel, Probes};
use torus_mfg::mfg::{solve_mfg, PathPair, TimeGrid};
use torus_mfg::model::audit::{audit_assumptions, default_corpus, AuditConfig};
use torus_mfg::model::{BuiltinHamiltonian, FixedCost, PayoffSpec};
use torus_mfg::report::{fmt_num, Outcome, StudyReport};
use torus_mfg::sampling::{random_zero_mean, rng};
use torus_mfg::spectral::{DistributionalDatum, SpectralField, TorusGrid};
use torus_mfg::SolverConfig;

const N: usize = 64;
const STEPS: usize = 200;
const HORIZON: f64 = 0.1;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

struct Fixture {
    grid: TorusGrid,
    m0: SpectralField,
    tg: TimeGrid,
    ham: BuiltinHamiltonian,
    payoff: PayoffSpec,
    cfg: SolverConfig,
    base: PathPair,
    coeffs: FrozenCoefficients,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let grid = TorusGrid::new(1, n).unwrap();
        let mbar = grid.uniform_density();
        let m0 = SpectralField::from_fn(&grid, |x| mbar * (1.0 + 0.3 * x[0].cos()));
        let tg = TimeGrid::new(0.0, HORIZON, STEPS).unwrap();
        let ham = BuiltinHamiltonian::NonSeparable { coupling: 1.0 };
        let payoff = PayoffSpec::default();
        let cfg = SolverConfig::default();
        let (base, _) = solve_mfg(&ham, &payoff, &m0, &tg, &cfg).unwrap();
        let coeffs = freeze_coefficients(&ham, &base).unwrap();
        Self { grid, m0, tg, ham, payoff, cfg, base, coeffs }
    }

    fn linear(&self, datum: DistributionalDatum) -> LinearizedPair {
        solve_linearized(&self.coeffs, &self.payoff, &self.base, &datum, &self.cfg)
            .unwrap()
            .0
    }

    fn kernel(&self) -> Kernel {
        kernel_from_base(&self.coeffs, &self.payoff, &self.base, &Probes::FullGrid, &self.cfg).unwrap()
    }
}

fn cos_cost() -> PayoffSpec {
    PayoffSpec::fixed(FixedCost { amplitude: 1.0, mode: 1 })
}

fn verdicts(report: &StudyReport) -> String {
    report
        .verdicts
        .iter()
        .map(|v| format!("{}={} ({})", v.name, v.outcome.as_str(), fmt_num(v.measured)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn spectral_exactness() -> Check {
    let g = TorusGrid::new(1, N).unwrap();
    let mut r = rng(1);
    let s = 6.0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f = random_zero_mean(&g, N / 2, 1.0, &mut r);
        let grad: f64 = f.gradient().iter().map(|d| d.sobolev_norm_sq(-s - 1.0)).sum();
        worst = worst.max(rel(grad + f.sobolev_norm_sq(-s - 1.0), f.sobolev_norm_sq(-s)));
        let twice = f.lambda_apply(2.5).lambda_apply(-4.0);
        let once = f.lambda_apply(-1.5);
        worst = worst.max((&twice - &once).sobolev_norm(0.0) / once.sobolev_norm(0.0));
        let sum: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        worst = worst.max(rel(f.sobolev_norm_sq(0.0), sum));
        let squares: f64 = f.synthesize().iter().map(|v| v * v).sum::<f64>() * g.cell_volume();
        worst = worst.max(rel(squares, g.volume() * sum));
    }
    check(worst <= 1e-12, format!("max relative defect {} <= 1e-12", fmt_num(worst)))
}

fn conservation(fx: &Fixture) -> Check {
    let mut drift = fx.base.mass_drift();
    let mut runs = 1;
    let cfg = &fx.cfg;
    let others = [
        (BuiltinHamiltonian::Kinetic, cos_cost(), fx.m0.clone()),
        (BuiltinHamiltonian::Separable, PayoffSpec::default(), fx.m0.clone()),
        (BuiltinHamiltonian::Transcendental, PayoffSpec::default(), fx.m0.clone()),
        (fx.ham.clone(), fx.payoff.clone(), SpectralField::constant(&fx.grid, fx.grid.uniform_density())),
    ];
    for (ham, payoff, m0) in &others {
        let (pair, _) = solve_mfg(ham, payoff, m0, &fx.tg, cfg).unwrap();
        drift = drift.max(pair.mass_drift());
        runs += 1;
    }
    let mut r = rng(2);
    let mut data: Vec<DistributionalDatum> = (0..4)
        .map(|_| DistributionalDatum::ZeroMeanField(random_zero_mean(&fx.grid, 20, 1.0, &mut r)))
        .collect();
    data.push(DistributionalDatum::DiracAt(vec![0.3]));
    data.push(DistributionalDatum::DiracGradientAt(vec![2.0], 0));
    for d in data {
        drift = drift.max(fx.linear(d).mass_drift());
        runs += 1;
    }
    check(drift <= 1e-12, format!("max mass drift {} over {runs} runs <= 1e-12", fmt_num(drift)))
}

fn linearity(fx: &Fixture) -> Check {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    let defect = |a: &[SpectralField], b: &[SpectralField]| {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).sobolev_norm(0.0)).fold(0.0, f64::max);
        let den = b.iter().map(|y| y.sobolev_norm(0.0)).fold(0.0, f64::max);
        num / den
    };
    let combine = |a: &[SpectralField], b: &[SpectralField], alpha: f64, beta: f64| -> Vec<SpectralField> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let mut z = x.scale(alpha);
                z.axpy(beta, y);
                z
            })
            .collect()
    };
    for _ in 0..20 {
        let a = random_zero_mean(&fx.grid, 20, 1.0, &mut r);
        let b = random_zero_mean(&fx.grid, 20, 1.0, &mut r);
        let alpha = rand::Rng::gen_range(&mut r, -2.0..2.0);
        let beta = rand::Rng::gen_range(&mut r, -2.0..2.0);
        let pa = fx.linear(DistributionalDatum::ZeroMeanField(a.clone()));
        let pb = fx.linear(DistributionalDatum::ZeroMeanField(b.clone()));
        let mut c = a.scale(alpha);
        c.axpy(beta, &b);
        let pc = fx.linear(DistributionalDatum::ZeroMeanField(c));
        worst = worst.max(defect(&pc.v_path, &combine(&pa.v_path, &pb.v_path, alpha, beta)));
        worst = worst.max(defect(&pc.mu_path, &combine(&pa.mu_path, &pb.mu_path, alpha, beta)));
    }
    check(worst <= 1e-10, format!("max superposition defect {} <= 1e-10 on 20 pairs", fmt_num(worst)))
}

fn taylor(fx: &Fixture) -> Check {
    let mut cfg = fx.cfg.clone();
    cfg.picard.tol = 1e-12;
    let chi = default_direction(&fx.grid, fx.grid.uniform_density());
    let eps: Vec<f64> = (3..=9).map(|j| 2f64.powi(-j)).collect();
    let r = taylor_rate_study(&fx.ham, &fx.payoff, &fx.m0, &chi, &eps, &fx.tg, &cfg).unwrap();
    let fit = r.fits.iter().find(|(n, _)| n == "z_vs_hminus1").map(|(_, f)| f.clone());
    let detail = match &fit {
        Some(f) => format!("slope {} (floor 1.2), r2 {}; {}", fmt_num(f.slope), fmt_num(f.r_squared), verdicts(&r)),
        None => verdicts(&r),
    };
    let pass = r.verdict("slope_hminus1").map(|v| v.outcome == Outcome::Pass).unwrap_or(false);
    check(pass, detail)
}

fn negative_norm(fx: &Fixture) -> Check {
    let r = hminus_bound_study(&fx.ham, &fx.payoff, &fx.m0, &default_family(16, 8), &fx.tg, &fx.cfg, 10.0).unwrap();
    let ratios = r.column("ratio_v").unwrap();
    let detail = format!(
        "{}; ratio k=2 {}, k=16 {}, dirac {}",
        verdicts(&r),
        fmt_num(ratios[0]),
        fmt_num(ratios[14]),
        fmt_num(ratios[15])
    );
    check(r.passed(), detail)
}

fn representation(fx: &Fixture, kernel: &Kernel) -> Check {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mu0 = random_zero_mean(&fx.grid, N / 2, 1.0, &mut r);
        let pair = fx.linear(DistributionalDatum::ZeroMeanField(mu0.clone()));
        let quad = kernel.pair_with(&mu0).unwrap();
        worst = worst.max((&quad - pair.v0()).sup_norm() / pair.v0().sup_norm());
    }
    check(worst <= 1e-6, format!("max relative error {} <= 1e-6 on 20 data", fmt_num(worst)))
}

fn regularity(coarse: &Kernel) -> Check {
    let rc = kernel_regularity_study(coarse, 6.0, 10.0).unwrap();
    let fine_fx = Fixture::new(2 * N);
    let fine = fine_fx.kernel();
    let rf = kernel_regularity_study(&fine, 6.0, 10.0).unwrap();
    let refine = refinement_verdicts(&rc, &rf, 1.1);
    let pass = rc.passed() && rf.passed() && refine.iter().all(|v| v.passed());
    let detail = format!(
        "n={N}: {}; n={}: {}; refinement: {}",
        verdicts(&rc),
        2 * N,
        verdicts(&rf),
        refine
            .iter()
            .map(|v| format!("{}={} ({})", v.name, v.outcome.as_str(), fmt_num(v.measured)))
            .collect::<Vec<_>>()
            .join(", ")
    );
    check(pass, detail)
}

fn residual(fx: &Fixture) -> Check {
    let cases = [
        ("decoupled", BuiltinHamiltonian::Kinetic, cos_cost()),
        ("fixture_a", fx.ham.clone(), fx.payoff.clone()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, ham, payoff) in &cases {
        let sup: Vec<f64> = [STEPS, 2 * STEPS]
            .iter()
            .map(|&steps| {
                let tg = TimeGrid::new(0.0, HORIZON, steps).unwrap();
                master_residual(ham, payoff, &fx.m0, &tg, &fx.cfg).unwrap().sup_norm
            })
            .collect();
        let factor = sup[0] / sup[1];
        pass &= factor >= 1.8;
        parts.push(format!("{name} {} -> {} (factor {})", fmt_num(sup[0]), fmt_num(sup[1]), fmt_num(factor)));
    }
    let mbar = SpectralField::constant(&fx.grid, fx.grid.uniform_density());
    let sym = master_residual(&fx.ham, &fx.payoff, &mbar, &fx.tg, &fx.cfg).unwrap().sup_norm;
    pass &= sym <= 10.0 * fx.cfg.picard.tol;
    parts.push(format!("symmetric {} <= {}", fmt_num(sym), fmt_num(10.0 * fx.cfg.picard.tol)));
    check(pass, parts.join("; "))
}

fn stability(fx: &Fixture) -> Check {
    let chi = default_direction(&fx.grid, fx.grid.uniform_density() / 4.0);
    let r = stability_study(&fx.ham, &fx.payoff, &fx.m0, &chi, &[1, 2, 3, 4, 5, 6], &fx.tg, &fx.cfg, 3.0).unwrap();
    check(r.passed(), verdicts(&r))
}

fn audit() -> Check {
    let g = TorusGrid::new(1, 32).unwrap();
    let cfg = AuditConfig::default();
    let corpus = default_corpus(&g, 4, &cfg);
    let mut pass = true;
    let mut parts = Vec::new();
    for ham in BuiltinHamiltonian::catalog() {
        let r = audit_assumptions(&ham, &PayoffSpec::default(), &corpus, &cfg).unwrap();
        pass &= r.passed();
        parts.push(format!("{}: {}", torus_mfg::model::Hamiltonian::name(&ham), verdicts(&r)));
    }
    check(pass, parts.join("; "))
}

fn degenerate(fx: &Fixture) -> Check {
    let zero = fx.linear(DistributionalDatum::ZeroMeanField(SpectralField::zeros(&fx.grid)));
    let zero_ok = zero.v_path.iter().chain(&zero.mu_path).all(|f| f.is_zero());
    let mut cfg = fx.cfg.clone();
    cfg.picard.tol = 1e-12;
    let ham = BuiltinHamiltonian::Kinetic;
    let (base, diag) = solve_mfg(&ham, &cos_cost(), &fx.m0, &fx.tg, &cfg).unwrap();
    let coeffs = freeze_coefficients(&ham, &base).unwrap();
    let probes = Probes::Points((0..8).map(|j| vec![std::f64::consts::TAU * j as f64 / 8.0]).collect());
    let k = kernel_from_base(&coeffs, &cos_cost(), &base, &probes, &cfg).unwrap();
    let k_zero = k.columns.iter().all(|c| c.is_zero());
    let pass = zero_ok && k_zero && diag.picard_iterations == 1;
    check(
        pass,
        format!(
            "zero datum exact: {zero_ok}; K identically zero: {k_zero}; decoupled Picard iterations: {}",
            diag.picard_iterations
        ),
    )
}

fn determinism(fx: &Fixture) -> Check {
    let chi = default_direction(&fx.grid, fx.grid.uniform_density());
    let eps = [0.125, 0.0625, 0.03125];
    let run = || {
        let t = taylor_rate_study(&fx.ham, &fx.payoff, &fx.m0, &chi, &eps, &fx.tg, &fx.cfg).unwrap();
        let s = stability_study(&fx.ham, &fx.payoff, &fx.m0, &chi.scale(0.25), &[1, 2], &fx.tg, &fx.cfg, 3.0).unwrap();
        format!("{}{}", t.to_csv(), s.to_csv())
    };
    let (a, b) = (run(), run());
    check(a == b, format!("{} CSV bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |i: usize| selected.is_empty() || selected.contains(&i);
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let start = Instant::now();
    let fx = Fixture::new(N);
    let kernel = if want(6) || want(7) { Some(fx.kernel()) } else { None };

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Check + '_>)> = vec![
        (1, "spectral exactness", Box::new(spectral_exactness)),
        (2, "mass conservation", Box::new(|| conservation(&fx))),
        (3, "linearity of the linearized solver", Box::new(|| linearity(&fx))),
        (4, "taylor rate", Box::new(|| taylor(&fx))),
        (5, "negative-norm bound", Box::new(|| negative_norm(&fx))),
        (6, "kernel representation", Box::new(|| representation(&fx, kernel.as_ref().unwrap()))),
        (7, "kernel lipschitz regularity", Box::new(|| regularity(kernel.as_ref().unwrap()))),
        (8, "master residual", Box::new(|| residual(&fx))),
        (9, "stability", Box::new(|| stability(&fx))),
        (10, "assumption audit", Box::new(audit)),
        (11, "degenerate correctness", Box::new(|| degenerate(&fx))),
        (12, "determinism", Box::new(|| determinism(&fx))),
    ];
    let mut failures = 0;
    for (i, name, run) in criteria {
        if !want(i) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} criterion {i:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failures} failing criteria, {:.1}s total", start.elapsed().as_secs_f64());
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
