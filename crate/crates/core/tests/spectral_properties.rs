use proptest::prelude::*;
use torus_mfg::sampling::{random_zero_mean, rng};
use torus_mfg::spectral::{trapezoid, DistributionalDatum, SpectralField, TorusGrid};

fn grid() -> TorusGrid {
    TorusGrid::new(1, 32).unwrap()
}

fn field(seed: u64, max_mode: usize) -> SpectralField {
    let g = grid();
    let mut f = random_zero_mean(&g, max_mode, 1.0, &mut rng(seed));
    f.add_assign(&SpectralField::constant(&g, (seed % 7) as f64 * 0.1));
    f
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesize_then_analyze_is_identity(seed in any::<u64>()) {
        let f = field(seed, 15);
        let back = SpectralField::analyze(f.grid(), &f.synthesize()).unwrap();
        prop_assert!((&back - &f).sobolev_norm(0.0) <= 1e-12 * f.sobolev_norm(0.0));
    }

    #[test]
    fn gradient_equivalence_is_an_identity(seed in any::<u64>(), s in 0.0f64..8.0) {
        let f = field(seed, 15);
        let grad: f64 = f.gradient().iter().map(|g| g.sobolev_norm_sq(-s - 1.0)).sum();
        prop_assert!(close(grad + f.sobolev_norm_sq(-s - 1.0), f.sobolev_norm_sq(-s), 1e-12));
    }

    #[test]
    fn lambda_composes_and_matches_norm(seed in any::<u64>(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
        let f = field(seed, 15);
        let twice = f.lambda_apply(a).lambda_apply(b);
        let once = f.lambda_apply(a + b);
        prop_assert!((&twice - &once).sobolev_norm(0.0) <= 1e-12 * once.sobolev_norm(0.0));
        prop_assert!(close(f.lambda_apply(a).sobolev_norm(0.0), f.sobolev_norm(a), 1e-12));
    }

    #[test]
    fn plancherel(seed in any::<u64>()) {
        let f = field(seed, 15);
        let g = f.grid();
        let sum: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!(close(f.sobolev_norm_sq(0.0), sum, 1e-12));
        let squares: Vec<f64> = f.synthesize().iter().map(|v| v * v).collect();
        prop_assert!(close(trapezoid(g, &squares), g.volume() * sum, 1e-12));
    }

    #[test]
    fn duality_and_interpolation(s1 in any::<u64>(), s2 in any::<u64>(), s in 0.5f64..6.0, alpha in 0.1f64..0.9) {
        let (f, g) = (field(s1, 15), field(s2, 15));
        let pairing = f.pairing(&g).norm() * f.grid().volume();
        let vol = f.grid().volume();
        prop_assert!(pairing <= vol * f.sobolev_norm(-s) * g.sobolev_norm(s) * (1.0 + 1e-12));
        let beta = 3.0;
        let a = alpha * beta;
        let bound = f.sobolev_norm(0.0).powf(1.0 - a / beta) * f.sobolev_norm(beta).powf(a / beta);
        prop_assert!(f.sobolev_norm(a) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn band_limited_products_are_exact(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (f, g) = (field(s1, 7), field(s2, 7));
        let product = SpectralField::pointwise_apply(&[&f, &g], |v, _| v[0] * v[1]).unwrap();
        let fv = f.synthesize();
        let gv = g.synthesize();
        let direct: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
        let direct = SpectralField::analyze(f.grid(), &direct).unwrap();
        prop_assert!((&product - &direct).sobolev_norm(0.0) <= 1e-12 * direct.sobolev_norm(0.0).max(1e-300));
    }

    #[test]
    fn negative_product_estimate(s1 in any::<u64>(), s2 in any::<u64>()) {
        let m = 8usize;
        let f = field(s1, m);
        let g = field(s2, m);
        let product = SpectralField::pointwise_apply(&[&f, &g], |v, _| v[0] * v[1]).unwrap();
        let c = 2f64.sqrt() * ((2 * m + 1) as f64).sqrt();
        prop_assert!(product.sobolev_norm(-1.0) <= c * f.sobolev_norm(-1.0) * g.sobolev_norm(1.0) * (1.0 + 1e-12));
    }

    #[test]
    fn mollification_converges_monotonically(seed in any::<u64>(), l in -3.0f64..3.0) {
        let f = field(seed, 15);
        let errors: Vec<f64> = (0..8).map(|j| (&f.mollify(2f64.powi(-j)) - &f).sobolev_norm(l)).collect();
        prop_assert!(errors.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(f.mollify(0.5).mean() == f.mean());
    }

    #[test]
    fn projection_is_idempotent_contraction(seed in any::<u64>()) {
        let f = field(seed, 15);
        let p = f.project_zero_mean();
        prop_assert_eq!(p.project_zero_mean(), p.clone());
        prop_assert!(p.sobolev_norm(1.0) <= f.sobolev_norm(1.0));
    }

    #[test]
    fn dirac_is_lipschitz_in_negative_norms(y in 0.0f64..6.28, dy in -1.0f64..1.0, s in 1.0f64..7.0) {
        let g = TorusGrid::new(1, 64).unwrap();
        let a = DistributionalDatum::DiracAt(vec![y]).synthesize(&g).unwrap();
        let b = DistributionalDatum::DiracAt(vec![y + dy]).synthesize(&g).unwrap();
        let l = -s - 1.0;
        let c = (0..g.len())
            .filter(|&i| g.is_retained(i))
            .map(|i| g.ksq(i) * (1.0 + g.ksq(i)).powf(l))
            .sum::<f64>()
            .sqrt()
            / g.volume();
        prop_assert!((&a - &b).sobolev_norm(l) <= c * dy.abs() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_index(seed in any::<u64>(), a in -8.0f64..8.0, b in 0.0f64..4.0) {
        let f = field(seed, 15);
        prop_assert!(f.sobolev_norm(a) <= f.sobolev_norm(a + b));
    }
}

#[test]
fn dirac_norm_matches_truncated_series() {
    let g = TorusGrid::new(1, 64).unwrap();
    let delta = DistributionalDatum::DiracAt(vec![0.0]).synthesize(&g).unwrap();
    let series: f64 = (-31i64..=31).map(|k| (1.0 + (k * k) as f64).powi(-7)).sum::<f64>()
        / (std::f64::consts::TAU * std::f64::consts::TAU);
    assert!(close(delta.sobolev_norm_sq(-7.0), series, 1e-13));
}
