//! Quadrature rules: Gauss-Legendre panels for frequency integrals and
//! composite rules for memory integrals on the time grid.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of a composite Gauss-Legendre rule: every interval
/// between consecutive `breaks` is split into `panels` equal panels.
pub fn composite_gauss(breaks: &[f64], panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity((breaks.len() - 1) * panels * order);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let h = (pair[1] - pair[0]) / panels as f64;
        for p in 0..panels {
            let a = pair[0] + h * p as f64;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
    }
    (nodes, weights)
}

/// Composite rule for integrals over a sampled interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
    /// Composite Simpson; an odd number of intervals closes with a 3/8 panel.
    SimpsonComposite,
}

impl QuadratureRule {
    /// Weights for `n_intervals` intervals of width `h`; they sum to `n_intervals * h`.
    pub fn weights(&self, n_intervals: usize, h: f64) -> Vec<f64> {
        let n = n_intervals;
        if n == 0 {
            return vec![0.0];
        }
        let mut w = vec![0.0; n + 1];
        match self {
            QuadratureRule::Trapezoid => {
                for wi in w.iter_mut() {
                    *wi = h;
                }
                w[0] = 0.5 * h;
                w[n] = 0.5 * h;
            }
            QuadratureRule::SimpsonComposite => {
                if n == 1 {
                    return QuadratureRule::Trapezoid.weights(1, h);
                }
                let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
                for k in (0..simpson_end).step_by(2) {
                    w[k] += h / 3.0;
                    w[k + 1] += 4.0 * h / 3.0;
                    w[k + 2] += h / 3.0;
                }
                if n % 2 == 1 {
                    let s = simpson_end;
                    w[s] += 3.0 * h / 8.0;
                    w[s + 1] += 9.0 * h / 8.0;
                    w[s + 2] += 9.0 * h / 8.0;
                    w[s + 3] += 3.0 * h / 8.0;
                }
            }
        }
        w
    }

    pub fn integrate<T>(&self, samples: &[T], h: f64) -> T
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
    {
        if samples.len() < 2 {
            return T::default();
        }
        let w = self.weights(samples.len() - 1, h);
        samples.iter().zip(&w).fold(T::default(), |acc, (&s, &wi)| acc + s * wi)
    }
}

/// Trapezoid rule over `samples` with spacing `h`.
pub fn trapezoid<T>(samples: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    QuadratureRule::Trapezoid.integrate(samples, h)
}
