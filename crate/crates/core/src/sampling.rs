//! Seeded random band-limited fields.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::spectral::{SpectralField, TorusGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real zero-mean trigonometric polynomial with modes `|k_j| ≤ max_mode`.
///
/// Each retained pair `±k` gets a uniform random coefficient in the unit disc
/// scaled by `amplitude / (1 + |k|²)`.
pub fn random_zero_mean<R: Rng>(
    grid: &TorusGrid,
    max_mode: usize,
    amplitude: f64,
    rng: &mut R,
) -> SpectralField {
    let d = grid.dim();
    let limit = max_mode.min(grid.n() / 2 - 1) as i64;
    let side = (2 * limit + 1) as usize;
    let mut terms = Vec::new();
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        let mut k = vec![0i64; d];
        for kj in k.iter_mut().rev() {
            *kj = (rem % side) as i64 - limit;
            rem /= side;
        }
        // one representative per ±k pair
        match k.iter().find(|&&v| v != 0) {
            Some(&first) if first > 0 => {}
            _ => continue,
        }
        let ksq: i64 = k.iter().map(|v| v * v).sum();
        let scale = amplitude / (1.0 + ksq as f64);
        let a = rng.gen_range(-1.0..1.0) * scale;
        let b = rng.gen_range(-1.0..1.0) * scale;
        terms.push((k, a, b));
    }
    SpectralField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, a, b)| {
                let phase: f64 = k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum();
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    })
    .project_zero_mean()
}

/// Positive density `m̄(1 + w)` with `w` zero-mean and `|w| ≤ relative`.
pub fn random_density<R: Rng>(
    grid: &TorusGrid,
    max_mode: usize,
    relative: f64,
    rng: &mut R,
) -> SpectralField {
    let w = random_zero_mean(grid, max_mode, 1.0, rng);
    let peak = w.sup_norm().max(f64::MIN_POSITIVE);
    let mbar = grid.uniform_density();
    let mut m = w.scale(mbar * relative / peak);
    m.add_assign(&SpectralField::constant(grid, mbar));
    m
}
