//! Real-valued functions sampled on a uniform time grid.

use crate::error::{Error, Result};

/// Relative tolerance (in units of `dt`) for deciding that a time is a grid point.
const GRID_SNAP: f64 = 1e-9;

/// Samples `values[k] = f(t0 + k * dt)` for `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl GridPath {
    /// Builds a path, checking that there are at least two samples, `dt > 0`
    /// and every value is finite.
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::config(format!(
                "a grid path needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::config("grid origin must be finite"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("sample {k} is not finite")));
        }
        Ok(Self { t0, dt, values })
    }

    /// Path on `[0, horizon]` with `values.len() - 1` equal steps.
    pub fn on_horizon(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len().saturating_sub(1).max(1);
        Self::new(0.0, horizon / n as f64, values)
    }

    /// Samples `f` at the `n + 1` points of the uniform grid on `[0, horizon]`.
    pub fn from_fn(n: usize, horizon: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("grid resolution n must be at least 1"));
        }
        let dt = horizon / n as f64;
        Self::new(0.0, dt, (0..=n).map(|k| f(k as f64 * dt)).collect())
    }

    pub(crate) fn from_parts_unchecked(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2 && dt > 0.0);
        Self { t0, dt, values }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps (one less than the number of samples).
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn last(&self) -> f64 {
        self.values[self.steps()]
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.time(k))
    }

    /// Index of the grid point at time `t`; no interpolation is done.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if !x.is_finite() || (x - k).abs() > GRID_SNAP * x.abs().max(1.0) {
            return Err(Error::OffGrid(t));
        }
        if k < 0.0 || k as usize > self.steps() {
            return Err(Error::OffGrid(t));
        }
        Ok(k as usize)
    }

    /// True when both paths live on the same grid.
    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.values.len() == other.values.len()
            && (self.dt - other.dt).abs() <= GRID_SNAP * self.dt
            && (self.t0 - other.t0).abs() <= GRID_SNAP * self.dt
    }

    pub(crate) fn check_same_grid(&self, other: &GridPath, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "{what}: paths are on different grids ({} steps of {} vs {} steps of {})",
                self.steps(),
                self.dt,
                other.steps(),
                other.dt
            )))
        }
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &GridPath, f: impl Fn(f64, f64) -> f64) -> Result<GridPath> {
        self.check_same_grid(other, "zip_with")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridPath::new(self.t0, self.dt, values)
    }

    pub fn sub(&self, other: &GridPath) -> Result<GridPath> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridPath) -> Result<GridPath> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridPath> {
        GridPath::new(self.t0, self.dt, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, lambda: f64) -> GridPath {
        GridPath::from_parts_unchecked(
            self.t0,
            self.dt,
            self.values.iter().map(|v| v * lambda).collect(),
        )
    }

    /// Largest `|f(t_k)|` over the grid.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Keeps every `factor`-th sample. The step count must be divisible by `factor`.
    pub fn subsample(&self, factor: usize) -> Result<GridPath> {
        if factor == 0 || self.steps() % factor != 0 || self.steps() / factor == 0 {
            return Err(Error::config(format!(
                "cannot subsample {} steps by a factor of {factor}",
                self.steps()
            )));
        }
        let values = self.values.iter().step_by(factor).copied().collect();
        GridPath::new(self.t0, self.dt * factor as f64, values)
    }

    /// Linear interpolation onto a grid `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<GridPath> {
        if factor == 0 {
            return Err(Error::config("refinement factor must be positive"));
        }
        let mut values = Vec::with_capacity(self.steps() * factor + 1);
        for w in self.values.windows(2) {
            for j in 0..factor {
                let s = j as f64 / factor as f64;
                values.push(w[0] + s * (w[1] - w[0]));
            }
        }
        values.push(self.last());
        GridPath::new(self.t0, self.dt / factor as f64, values)
    }

    /// The first `k + 1` samples, i.e. the path restricted to `[t0, t_k]`.
    pub fn truncate(&self, k: usize) -> Result<GridPath> {
        if k == 0 || k > self.steps() {
            return Err(Error::config(format!(
                "cannot truncate a {}-step path to {k} steps",
                self.steps()
            )));
        }
        Ok(GridPath::from_parts_unchecked(
            self.t0,
            self.dt,
            self.values[..=k].to_vec(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(GridPath::new(0.0, 0.1, vec![1.0]).is_err());
        assert!(GridPath::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(GridPath::new(0.0, 0.1, vec![1.0, f64::NAN]).is_err());
        assert!(GridPath::from_fn(0, 1.0, |t| t).is_err());
    }

    #[test]
    fn index_lookup_is_exact_on_grid_only() {
        let p = GridPath::from_fn(10, 1.0, |t| t).unwrap();
        assert_eq!(p.index_of(0.3).unwrap(), 3);
        assert_eq!(p.index_of(1.0).unwrap(), 10);
        assert!(matches!(p.index_of(0.35), Err(Error::OffGrid(_))));
        assert!(p.index_of(1.1).is_err());
        assert!(p.index_of(-0.1).is_err());
    }

    #[test]
    fn refine_then_subsample_round_trips() {
        let p = GridPath::from_fn(8, 2.0, |t| (3.0 * t).sin()).unwrap();
        let back = p.refine(4).unwrap().subsample(4).unwrap();
        assert_eq!(back.steps(), 8);
        for (a, b) in p.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((back.dt() - p.dt()).abs() < 1e-15);
    }
}
