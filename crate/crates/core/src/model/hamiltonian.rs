use std::fmt;

use crate::error::{Error, Result};

/// Default lower bound applied to density samples before evaluating `H`.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-8;

/// Local Hamiltonian `H(t, x, p, q)` with closed-form partial derivatives.
///
/// `p` is the placeholder for `∇u` (length `d`) and `q` for the pointwise density.
/// Derivative buffers are row-major: `hess_pp` fills `d × d` entries.
pub trait Hamiltonian: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn value(&self, t: f64, x: &[f64], p: &[f64], q: f64) -> f64;

    /// `D_p H`.
    fn grad_p(&self, t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]);

    /// `∂_q H`.
    fn d_q(&self, t: f64, x: &[f64], p: &[f64], q: f64) -> f64;

    /// `D²_{pp} H`.
    fn hess_pp(&self, t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]);

    /// `D_p ∂_q H`.
    fn cross_pq(&self, t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]);

    /// `∂²_{qq} H`, used by the derivative audit.
    fn d_qq(&self, t: f64, x: &[f64], p: &[f64], q: f64) -> f64;

    /// False when `∂_q H ≡ 0`.
    fn depends_on_density(&self) -> bool {
        true
    }

    /// False when `D_p H ≡ 0`.
    fn depends_on_momentum(&self) -> bool {
        true
    }

    /// Smallest admissible density value.
    fn density_floor(&self) -> f64 {
        DEFAULT_DENSITY_FLOOR
    }
}

/// Hamiltonians shipped with the laboratory.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinHamiltonian {
    /// `½|p|² + c·p₁q`, polynomial and non-separable.
    NonSeparable { coupling: f64 },
    /// `sin(|p|²) ln(1+q²)`.
    Transcendental,
    /// `½|p|² + q`.
    Separable,
    /// `½|p|²`, independent of the density.
    Kinetic,
    /// `a(x) P(|p|²) Q(q)` with `a(x) = 1 + α cos(x₁)` and polynomial `P`, `Q`
    /// given by ascending coefficients.
    Product {
        alpha: f64,
        p_coeffs: Vec<f64>,
        q_coeffs: Vec<f64>,
    },
    /// `H ≡ 0`.
    Zero,
}

impl BuiltinHamiltonian {
    /// Looks up a built-in by name with its parameter list.
    ///
    /// Names: `nonseparable [c]`, `transcendental`, `separable`, `kinetic`,
    /// `zero`, `product [α, P-degree, P coeffs…, Q coeffs…]`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let no_params = |h: Self| {
            if params.is_empty() {
                Ok(h)
            } else {
                Err(Error::InvalidArgument(format!("hamiltonian `{name}` takes no parameters")))
            }
        };
        match name {
            "nonseparable" => match params {
                [] => Ok(Self::NonSeparable { coupling: 1.0 }),
                [c] => Ok(Self::NonSeparable { coupling: *c }),
                _ => Err(Error::InvalidArgument("nonseparable takes at most one parameter".into())),
            },
            "transcendental" => no_params(Self::Transcendental),
            "separable" => no_params(Self::Separable),
            "kinetic" => no_params(Self::Kinetic),
            "zero" => no_params(Self::Zero),
            "product" => {
                let (&alpha, rest) = params.split_first().ok_or_else(|| {
                    Error::InvalidArgument("product needs [alpha, p_len, p…, q…]".into())
                })?;
                let (&p_len, rest) = rest.split_first().ok_or_else(|| {
                    Error::InvalidArgument("product needs [alpha, p_len, p…, q…]".into())
                })?;
                let p_len = p_len as usize;
                if p_len == 0 || p_len >= rest.len() {
                    return Err(Error::InvalidArgument(
                        "product needs non-empty P and Q coefficient lists".into(),
                    ));
                }
                Ok(Self::Product {
                    alpha,
                    p_coeffs: rest[..p_len].to_vec(),
                    q_coeffs: rest[p_len..].to_vec(),
                })
            }
            other => Err(Error::InvalidArgument(format!("unknown hamiltonian `{other}`"))),
        }
    }

    /// The three catalog entries the acceptance audit covers.
    pub fn catalog() -> Vec<Self> {
        vec![
            Self::NonSeparable { coupling: 1.0 },
            Self::Transcendental,
            Self::Separable,
        ]
    }
}

fn norm_sq(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum()
}

// value, first and second derivative of a polynomial with ascending coefficients
fn poly(c: &[f64], z: f64) -> (f64, f64, f64) {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for &a in c.iter().rev() {
        d2 = d2 * z + 2.0 * d1;
        d1 = d1 * z + v;
        v = v * z + a;
    }
    (v, d1, d2)
}

impl Hamiltonian for BuiltinHamiltonian {
    fn name(&self) -> String {
        match self {
            Self::NonSeparable { coupling } => format!("nonseparable({coupling})"),
            Self::Transcendental => "transcendental".into(),
            Self::Separable => "separable".into(),
            Self::Kinetic => "kinetic".into(),
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                format!("product({alpha};{p_coeffs:?};{q_coeffs:?})")
            }
            Self::Zero => "zero".into(),
        }
    }

    fn value(&self, _t: f64, x: &[f64], p: &[f64], q: f64) -> f64 {
        match self {
            Self::NonSeparable { coupling } => 0.5 * norm_sq(p) + coupling * p[0] * q,
            Self::Transcendental => norm_sq(p).sin() * (1.0 + q * q).ln(),
            Self::Separable => 0.5 * norm_sq(p) + q,
            Self::Kinetic => 0.5 * norm_sq(p),
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                (1.0 + alpha * x[0].cos()) * poly(p_coeffs, norm_sq(p)).0 * poly(q_coeffs, q).0
            }
            Self::Zero => 0.0,
        }
    }

    fn grad_p(&self, _t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]) {
        match self {
            Self::NonSeparable { coupling } => {
                out.copy_from_slice(p);
                out[0] += coupling * q;
            }
            Self::Transcendental => {
                let f = 2.0 * norm_sq(p).cos() * (1.0 + q * q).ln();
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = f * pi;
                }
            }
            Self::Separable | Self::Kinetic => out.copy_from_slice(p),
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                let f = (1.0 + alpha * x[0].cos())
                    * 2.0
                    * poly(p_coeffs, norm_sq(p)).1
                    * poly(q_coeffs, q).0;
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = f * pi;
                }
            }
            Self::Zero => out.fill(0.0),
        }
    }

    fn d_q(&self, _t: f64, x: &[f64], p: &[f64], q: f64) -> f64 {
        match self {
            Self::NonSeparable { coupling } => coupling * p[0],
            Self::Transcendental => norm_sq(p).sin() * 2.0 * q / (1.0 + q * q),
            Self::Separable => 1.0,
            Self::Kinetic | Self::Zero => 0.0,
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                (1.0 + alpha * x[0].cos()) * poly(p_coeffs, norm_sq(p)).0 * poly(q_coeffs, q).1
            }
        }
    }

    fn hess_pp(&self, _t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]) {
        let d = p.len();
        out.fill(0.0);
        match self {
            Self::NonSeparable { .. } | Self::Separable | Self::Kinetic => {
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }
            Self::Transcendental => {
                let r = norm_sq(p);
                let l = (1.0 + q * q).ln();
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = l * (2.0 * r.cos() * delta - 4.0 * r.sin() * p[i] * p[j]);
                    }
                }
            }
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                let (_, p1, p2) = poly(p_coeffs, norm_sq(p));
                let s = (1.0 + alpha * x[0].cos()) * poly(q_coeffs, q).0;
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = s * (2.0 * p1 * delta + 4.0 * p2 * p[i] * p[j]);
                    }
                }
            }
            Self::Zero => {}
        }
    }

    fn cross_pq(&self, _t: f64, x: &[f64], p: &[f64], q: f64, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            Self::NonSeparable { coupling } => out[0] = *coupling,
            Self::Transcendental => {
                let f = 2.0 * norm_sq(p).cos() * 2.0 * q / (1.0 + q * q);
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = f * pi;
                }
            }
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                let f = (1.0 + alpha * x[0].cos())
                    * 2.0
                    * poly(p_coeffs, norm_sq(p)).1
                    * poly(q_coeffs, q).1;
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = f * pi;
                }
            }
            Self::Separable | Self::Kinetic | Self::Zero => {}
        }
    }

    fn d_qq(&self, _t: f64, x: &[f64], p: &[f64], q: f64) -> f64 {
        match self {
            Self::Transcendental => {
                let den = 1.0 + q * q;
                norm_sq(p).sin() * 2.0 * (1.0 - q * q) / (den * den)
            }
            Self::Product { alpha, p_coeffs, q_coeffs } => {
                (1.0 + alpha * x[0].cos()) * poly(p_coeffs, norm_sq(p)).0 * poly(q_coeffs, q).2
            }
            _ => 0.0,
        }
    }

    fn depends_on_density(&self) -> bool {
        match self {
            Self::Kinetic | Self::Zero => false,
            Self::NonSeparable { coupling } => *coupling != 0.0,
            Self::Product { q_coeffs, .. } => q_coeffs.len() > 1,
            _ => true,
        }
    }

    fn depends_on_momentum(&self) -> bool {
        match self {
            Self::Zero => false,
            Self::Product { p_coeffs, .. } => p_coeffs.len() > 1,
            _ => true,
        }
    }
}
