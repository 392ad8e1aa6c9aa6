use crate::error::{Error, Result};

/// Uniform time grid `t_n = t0 + n·dt`, `n = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite()) || !(t_end > t0) {
            return Err(Error::InvalidTimeGrid(format!("need t0 < T, got [{t0}, {t_end}]")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidTimeGrid("n_steps must be positive".into()));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.t_end
        } else {
            self.t0 + n as f64 * self.dt()
        }
    }

    /// The same grid restricted to `[t_k, T]`.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        if k >= self.n_steps {
            return Err(Error::InvalidTimeGrid(format!(
                "cannot drop {k} of {} steps",
                self.n_steps
            )));
        }
        Self::new(self.time(k), self.t_end, self.n_steps - k)
    }

    /// Same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.t0, self.t_end, self.n_steps * factor.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_grid() {
        let g = TimeGrid::new(0.0, 0.1, 200).unwrap();
        assert_eq!(g.len(), 201);
        assert!((g.dt() - 5e-4).abs() < 1e-18);
        assert_eq!(g.time(200), 0.1);
        let s = g.shifted(1).unwrap();
        assert_eq!(s.n_steps(), 199);
        assert!((s.dt() - g.dt()).abs() < 1e-15);
        assert!(TimeGrid::new(0.1, 0.1, 3).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
    }
}
