use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_n = nΔt`, `n = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Grid("time grid needs at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Grid(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    /// Index `n` with `t_n = t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let n = x.round();
        ((x - n).abs() < 1e-9 && n >= 0.0 && n <= self.n_steps as f64).then_some(n as usize)
    }

    /// Trapezoid weights on the nodes.
    pub fn trapezoid_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.n_steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps && (self.horizon - other.horizon).abs() <= 1e-14 * self.horizon
    }
}
