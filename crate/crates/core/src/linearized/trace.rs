use super::solver::LinearizedPair;
use crate::report::{fmt_num, StudyReport};
use crate::spectral::SpectralField;

/// Negative-norm sizes of a linearized solution relative to its datum.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativeNormTrace {
    /// `sup_t ‖v‖_{H^{−s}}`.
    pub sup_v: f64,
    /// `sup_t ‖μ‖_{H^{−s−1}}`.
    pub sup_mu: f64,
    /// `‖μ₀‖_{H^{−s−1}}`.
    pub mu0_norm: f64,
    /// `sup_v / ‖μ₀‖`; `None` for a vanishing datum.
    pub ratio_v: Option<f64>,
    pub ratio_mu: Option<f64>,
    /// `∫ ‖∇v‖²_{H^{−s}} dt` (trapezoid in time).
    pub grad_v_integral: f64,
    /// `∫ ‖∇μ‖²_{H^{−s−1}} dt`.
    pub grad_mu_integral: f64,
}

fn grad_norm_sq(f: &SpectralField, l: f64) -> f64 {
    f.gradient().iter().map(|g| g.sobolev_norm_sq(l)).sum()
}

fn trapezoid_in_time(values: &[f64], dt: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Measures the negative Sobolev norms of `(v, μ)` against `‖μ₀‖_{H^{−s−1}}`.
pub fn negative_norm_trace(pair: &LinearizedPair, s: f64) -> NegativeNormTrace {
    let sup = |path: &[SpectralField], l: f64| {
        path.iter().map(|f| f.sobolev_norm(l)).fold(0.0, f64::max)
    };
    let sup_v = sup(&pair.v_path, -s);
    let sup_mu = sup(&pair.mu_path, -s - 1.0);
    let mu0_norm = pair.mu_path[0].sobolev_norm(-s - 1.0);
    let ratio = |x: f64| (mu0_norm > 0.0).then(|| x / mu0_norm);
    let dt = pair.time_grid.dt();
    let gv: Vec<f64> = pair.v_path.iter().map(|f| grad_norm_sq(f, -s)).collect();
    let gm: Vec<f64> = pair.mu_path.iter().map(|f| grad_norm_sq(f, -s - 1.0)).collect();
    NegativeNormTrace {
        sup_v,
        sup_mu,
        mu0_norm,
        ratio_v: ratio(sup_v),
        ratio_mu: ratio(sup_mu),
        grad_v_integral: trapezoid_in_time(&gv, dt),
        grad_mu_integral: trapezoid_in_time(&gm, dt),
    }
}

impl NegativeNormTrace {
    pub const COLUMNS: [&'static str; 7] = [
        "sup_v",
        "sup_mu",
        "mu0_norm",
        "ratio_v",
        "ratio_mu",
        "grad_v_integral",
        "grad_mu_integral",
    ];

    /// Row values in [`COLUMNS`](Self::COLUMNS) order; vanishing-datum ratios are `NaN`.
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.sup_v,
            self.sup_mu,
            self.mu0_norm,
            self.ratio_v.unwrap_or(f64::NAN),
            self.ratio_mu.unwrap_or(f64::NAN),
            self.grad_v_integral,
            self.grad_mu_integral,
        ]
    }

    pub fn to_report(&self, s: f64) -> StudyReport {
        let mut r = StudyReport::new("negative_norm_trace", "s", &Self::COLUMNS);
        r.meta("ratio_sentinel", "NaN marks a vanishing datum");
        r.meta("s", fmt_num(s));
        r.push(s, "trace", self.values());
        r
    }
}
