use torus_mfg::mfg::{
    fp_forward_sweep, heat_propagate, hjb_backward_sweep, read_path, solve_mfg, PathPair, TimeGrid,
};
use torus_mfg::model::{BuiltinHamiltonian, FixedCost, PayoffSpec};
use torus_mfg::spectral::{SpectralField, TorusGrid};
use torus_mfg::{Error, SolverConfig};

fn fixture(n: usize) -> (TorusGrid, SpectralField) {
    let g = TorusGrid::new(1, n).unwrap();
    let mbar = g.uniform_density();
    let m0 = SpectralField::from_fn(&g, |x| mbar * (1.0 + 0.3 * x[0].cos()));
    (g, m0)
}

fn fixture_a() -> BuiltinHamiltonian {
    BuiltinHamiltonian::NonSeparable { coupling: 1.0 }
}

fn cos_cost() -> PayoffSpec {
    PayoffSpec::fixed(FixedCost { amplitude: 1.0, mode: 1 })
}

#[test]
fn heat_examples() {
    let g = TorusGrid::new(1, 16).unwrap();
    let f = SpectralField::from_fn(&g, |x| x[0].cos() + 0.3 * (3.0 * x[0]).sin());
    assert_eq!(heat_propagate(&f, 0.0).unwrap(), f);
    let c = SpectralField::from_fn(&g, |x| x[0].cos());
    let decayed = heat_propagate(&c, 1.0).unwrap();
    assert!((&decayed - &c.scale((-1f64).exp())).sup_norm() < 1e-15);
    let ab = heat_propagate(&heat_propagate(&f, 0.3).unwrap(), 0.4).unwrap();
    let direct = heat_propagate(&f, 0.7).unwrap();
    assert!((&ab - &direct).sobolev_norm(0.0) <= 1e-12 * direct.sobolev_norm(0.0));
    assert!(heat_propagate(&f, -1.0).is_err());
}

#[test]
fn pure_heat_value_function_is_exact() {
    let (g, m0) = fixture(32);
    let tg = TimeGrid::new(0.0, 0.5, 50).unwrap();
    let m_path = vec![m0; tg.len()];
    let (u, _) = hjb_backward_sweep(&BuiltinHamiltonian::Zero, &cos_cost(), &m_path, &tg).unwrap();
    for (i, ui) in u.iter().enumerate() {
        let expected = SpectralField::from_fn(&g, |x| (-(0.5 - tg.time(i))).exp() * x[0].cos());
        assert!((ui - &expected).sup_norm() < 1e-14, "node {i}");
    }
}

#[test]
fn terminal_value_is_the_cost() {
    let (_, m0) = fixture(32);
    let tg = TimeGrid::new(0.0, 0.1, 20).unwrap();
    let payoff = PayoffSpec::default();
    let m_path = vec![m0.clone(); tg.len()];
    let (u, _) = hjb_backward_sweep(&fixture_a(), &payoff, &m_path, &tg).unwrap();
    assert_eq!(u[20], payoff.g_eval(&m0).unwrap());
}

#[test]
fn density_without_drift_is_heat_flow() {
    let (g, m0) = fixture(32);
    let tg = TimeGrid::new(0.2, 0.4, 40).unwrap();
    let u = vec![SpectralField::from_fn(&g, |x| x[0].sin()); tg.len()];
    let (m, _) = fp_forward_sweep(&BuiltinHamiltonian::Zero, &u, &m0, &tg).unwrap();
    for (i, mi) in m.iter().enumerate() {
        let expected = m0.heat_propagate(tg.time(i) - 0.2);
        assert!((mi - &expected).sup_norm() < 1e-14);
    }
}

#[test]
fn uniform_density_with_constant_drift_stays_uniform() {
    let g = TorusGrid::new(1, 32).unwrap();
    let mbar = SpectralField::constant(&g, g.uniform_density());
    let tg = TimeGrid::new(0.0, 0.1, 20).unwrap();
    let u = vec![SpectralField::zeros(&g); tg.len()];
    let (m, _) = fp_forward_sweep(&fixture_a(), &u, &mbar, &tg).unwrap();
    for mi in &m {
        assert!((mi - &mbar).sup_norm() < 1e-15);
    }
}

#[test]
fn decoupled_systems_converge_after_one_sweep() {
    let (_, m0) = fixture(32);
    let tg = TimeGrid::new(0.0, 0.1, 50).unwrap();
    let mut cfg = SolverConfig::default();
    cfg.picard.tol = 1e-12;
    for ham in [BuiltinHamiltonian::Zero, BuiltinHamiltonian::Kinetic] {
        let (_, diag) = solve_mfg(&ham, &cos_cost(), &m0, &tg, &cfg).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.picard_iterations, 1, "{ham:?}");
        assert!(diag.final_defect <= 1e-12);
    }
}

#[test]
fn fixture_run_is_conservative_real_and_monotone() {
    let (_, m0) = fixture(64);
    let tg = TimeGrid::new(0.0, 0.1, 200).unwrap();
    let cfg = SolverConfig::default();
    let (pair, diag) = solve_mfg(&fixture_a(), &PayoffSpec::default(), &m0, &tg, &cfg).unwrap();
    assert!(diag.converged && diag.final_defect <= cfg.picard.tol);
    assert!(diag.defect_history.windows(2).all(|w| w[1] < w[0]), "{:?}", diag.defect_history);
    assert!(pair.mass_drift() <= 1e-12);
    for f in pair.u_path.iter().chain(&pair.m_path) {
        assert!(f.max_imag() <= 1e-10 * f.sup_norm().max(1.0));
    }
    assert!(!diag.clamp_flagged);
}

#[test]
fn shorter_horizons_need_no_more_sweeps() {
    let (_, m0) = fixture(32);
    let cfg = SolverConfig::default();
    let iterations: Vec<usize> = [(0.2, 200), (0.1, 100), (0.05, 50)]
        .iter()
        .map(|&(t, steps)| {
            let tg = TimeGrid::new(0.0, t, steps).unwrap();
            solve_mfg(&fixture_a(), &PayoffSpec::default(), &m0, &tg, &cfg)
                .unwrap()
                .1
                .picard_iterations
        })
        .collect();
    assert!(iterations.windows(2).all(|w| w[1] <= w[0]), "{iterations:?}");
}

#[test]
fn scheme_is_first_order_in_time() {
    let (_, m0) = fixture(32);
    let mut cfg = SolverConfig::default();
    cfg.picard.tol = 1e-12;
    let solve = |steps| {
        let tg = TimeGrid::new(0.0, 0.1, steps).unwrap();
        solve_mfg(&fixture_a(), &PayoffSpec::default(), &m0, &tg, &cfg).unwrap().0
    };
    let paths: Vec<PathPair> = [50, 100, 200].into_iter().map(solve).collect();
    let diff = |coarse: &PathPair, fine: &PathPair| {
        coarse
            .u_path
            .iter()
            .enumerate()
            .map(|(i, u)| (u - &fine.u_path[2 * i]).sobolev_norm(1.0))
            .fold(0.0, f64::max)
    };
    let d1 = diff(&paths[0], &paths[1]);
    let d2 = diff(&paths[1], &paths[2]);
    assert!(d1 / d2 >= 1.8, "{d1} {d2}");
}

#[test]
fn exhausted_iterations_report_history() {
    let (_, m0) = fixture(32);
    let tg = TimeGrid::new(0.0, 0.1, 50).unwrap();
    let mut cfg = SolverConfig::default();
    cfg.picard.max_iter = 3;
    match solve_mfg(&fixture_a(), &PayoffSpec::default(), &m0, &tg, &cfg) {
        Err(Error::NonConvergence(h)) => {
            assert_eq!(h.defects.len(), 2);
            assert_eq!(h.tolerance, cfg.picard.tol);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn initial_density_is_checked() {
    let (g, m0) = fixture(32);
    let tg = TimeGrid::new(0.0, 0.1, 10).unwrap();
    let cfg = SolverConfig::default();
    let heavy = m0.scale(1.1);
    assert!(matches!(
        solve_mfg(&fixture_a(), &PayoffSpec::default(), &heavy, &tg, &cfg),
        Err(Error::Mass { .. })
    ));
    let mbar = g.uniform_density();
    let far = SpectralField::from_fn(&g, |x| mbar * (1.0 + 0.9 * (3.0 * x[0]).cos()));
    assert!(matches!(
        solve_mfg(&fixture_a(), &PayoffSpec::default(), &far, &tg, &cfg),
        Err(Error::OutsideBall { .. })
    ));
}

#[test]
fn paths_roundtrip() {
    let (_, m0) = fixture(16);
    let tg = TimeGrid::new(0.0, 0.1, 10).unwrap();
    let (pair, _) = solve_mfg(&fixture_a(), &PayoffSpec::default(), &m0, &tg, &SolverConfig::default()).unwrap();
    let bytes = pair.to_bytes();
    assert_eq!(&bytes[..4], b"MFGP");
    assert_eq!(PathPair::read(&mut bytes.as_slice()).unwrap(), pair);
    let (tg_back, u) = read_path(&mut bytes.as_slice()).unwrap();
    assert_eq!(tg_back, tg);
    assert_eq!(u, pair.u_path);
}

#[test]
fn time_grid_rejects_empty_intervals() {
    assert!(TimeGrid::new(0.1, 0.1, 10).is_err());
    assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
}

#[test]
fn kinetic_value_function_converges_to_dense_reference() {
    let (_, m0) = fixture(32);
    let m_path = |tg: &TimeGrid| vec![m0.clone(); tg.len()];
    let sweep = |steps: usize| {
        let tg = TimeGrid::new(0.0, 0.2, steps).unwrap();
        hjb_backward_sweep(&BuiltinHamiltonian::Kinetic, &cos_cost(), &m_path(&tg), &tg)
            .unwrap()
            .0
    };
    let reference = sweep(20 * 16);
    let error = |steps: usize| {
        let u = sweep(steps);
        let stride = 320 / steps;
        u.iter()
            .enumerate()
            .map(|(i, ui)| (ui - &reference[i * stride]).sup_norm())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (error(20), error(40));
    assert!(e1 < 1e-2 && e1 / e2 > 1.8, "{e1} {e2}");
}
