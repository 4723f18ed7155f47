//! Uniform time grids, physical constants and sampled time series.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Uniform grid `t_i = i * dt`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if n_steps < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 steps, got {n_steps}")));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid with step `dt` whose last point is the first grid point `>= t_max` (up to round-off).
    pub fn covering(dt: f64, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
        }
        let n = (t_max / dt - 1e-9).ceil().max(2.0) as usize;
        Self::new(dt, n)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        self.dt * i as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.t(i))
    }

    /// The same time span with half the step.
    pub fn refined(&self) -> Self {
        Self { dt: self.dt / 2.0, n_steps: self.n_steps * 2 }
    }

    /// Truncate to the first `n_steps` steps.
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        Self::new(self.dt, n_steps.min(self.n_steps))
    }

    /// True when `other` samples a sub-interval of this grid with the same step.
    pub fn covers(&self, other: &TimeGrid) -> bool {
        (self.dt - other.dt).abs() <= 1e-12 * self.dt && self.n_steps >= other.n_steps
    }
}

/// Physical constants. Both default to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub k_b: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hbar: 1.0, k_b: 1.0 }
    }
}

/// Values that can be combined linearly for interpolation.
pub trait Interpolate: Clone {
    fn combine(points: [&Self; 4], weights: [f64; 4]) -> Self;
}

impl Interpolate for f64 {
    fn combine(p: [&Self; 4], w: [f64; 4]) -> Self {
        p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3]
    }
}

impl Interpolate for C64 {
    fn combine(p: [&Self; 4], w: [f64; 4]) -> Self {
        p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3]
    }
}

impl Interpolate for CMatrix {
    fn combine(p: [&Self; 4], w: [f64; 4]) -> Self {
        let mut out = p[0] * C64::from(w[0]);
        for k in 1..4 {
            out.zip_apply(p[k], |o, v| *o += v * w[k]);
        }
        out
    }
}

/// A quantity sampled on every point of a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct Series<T> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T: Interpolate> Series<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl FnMut(f64) -> T) -> Self {
        let values = grid.times().map(f).collect();
        Self { grid, values }
    }

    /// A constant series.
    pub fn constant(grid: TimeGrid, value: T) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &T {
        &self.values[i]
    }

    /// Four-point Lagrange interpolation; exact at grid points, clamped at the ends.
    pub fn at(&self, t: f64) -> T {
        let dt = self.grid.dt();
        let n = self.grid.n_steps();
        let x = (t / dt).clamp(0.0, n as f64);
        let nearest = x.round();
        if (x - nearest).abs() < 1e-10 {
            return self.values[nearest as usize].clone();
        }
        if n < 3 {
            let k = (x.floor() as usize).min(n - 1);
            let u = x - k as f64;
            let v = &self.values;
            return T::combine([&v[k], &v[k + 1], &v[k], &v[k]], [1.0 - u, u, 0.0, 0.0]);
        }
        let k = (x.floor() as usize).min(n - 1);
        let start = k.saturating_sub(1).min(n - 3);
        let u = x - start as f64;
        let nodes = [0.0, 1.0, 2.0, 3.0];
        let mut w = [1.0; 4];
        for (j, wj) in w.iter_mut().enumerate() {
            for (m, &xm) in nodes.iter().enumerate() {
                if m != j {
                    *wj *= (u - xm) / (nodes[j] - xm);
                }
            }
        }
        let v = &self.values;
        T::combine([&v[start], &v[start + 1], &v[start + 2], &v[start + 3]], w)
    }

    pub fn map<U: Interpolate>(&self, f: impl FnMut(&T) -> U) -> Series<U> {
        Series { grid: self.grid, values: self.values.iter().map(f).collect() }
    }
}

/// Operator-valued series, e.g. the drift operator of a convolutionless equation.
pub type OperatorSeries = Series<CMatrix>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(0.1, 1).is_err());
        let g = TimeGrid::covering(0.01, 8.0).unwrap();
        assert_eq!(g.n_steps(), 800);
        assert!((g.t_max() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let g = TimeGrid::new(0.1, 20).unwrap();
        let s = Series::from_fn(g, |t| 1.0 - 2.0 * t + 0.5 * t * t * t);
        for &t in &[0.03, 0.55, 1.234, 1.97] {
            let exact = 1.0 - 2.0 * t + 0.5 * t * t * t;
            assert!((s.at(t) - exact).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(s.at(0.5), *s.get(5));
    }
}
