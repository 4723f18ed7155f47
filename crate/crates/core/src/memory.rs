//! Scalar memory equations: the damped amplitude of the rotating-wave
//! oscillator and the classical Brownian trajectory.

use crate::error::{Error, Result};
use crate::grid::{Series, TimeGrid};
use crate::kernels::BathKernel;
use crate::linalg::C64;
use crate::quadrature::QuadratureRule;

/// Guard below which `|c(t)|` makes `C(t)` undefined.
pub const EPS_DIV: f64 = 1e-12;

fn check_coverage(kernel: &BathKernel, grid: &TimeGrid) -> Result<()> {
    let kg = kernel.grid();
    if (kg.dt() - grid.dt()).abs() > 1e-12 * grid.dt() || kg.n_steps() < grid.n_steps() {
        return Err(Error::InvalidParameter("kernel grid does not cover the solver grid".into()));
    }
    Ok(())
}

/// Solution of `c' = -i Omega c - int_0^t alpha(t - s) c(s) ds`, `c(0) = 1`,
/// and `C(t) = int_0^t alpha(t - s) c(s) ds / c(t)`.
#[derive(Debug, Clone)]
pub struct AmplitudeResponse {
    grid: TimeGrid,
    pub amp_c: Vec<C64>,
    /// `NaN` where flagged.
    pub big_c: Vec<C64>,
    pub flagged: Vec<bool>,
}

impl AmplitudeResponse {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn has_flags(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    /// `C(t)` as an interpolable series; refused if any time is flagged.
    pub fn c_series(&self) -> Result<Series<C64>> {
        if let Some(k) = self.flagged.iter().position(|&f| f) {
            return Err(Error::FlaggedCoefficient { t: self.grid.t(k) });
        }
        Series::new(self.grid, self.big_c.clone())
    }

    pub fn amp_series(&self) -> Series<C64> {
        Series::new(self.grid, self.amp_c.clone()).expect("lengths match")
    }
}

/// Trapezoid memory `dt [a(n) u_0 / 2 + sum_{k=1}^{n-1} a(n-k) u_k + a(0) u_n / 2]`.
fn amplitude_memory(a: &[C64], u: &[C64], last: C64, n: usize, dt: f64) -> C64 {
    if n == 0 {
        return C64::new(0.0, 0.0);
    }
    let mut sum = 0.5 * (a[n] * u[0] + a[0] * last);
    for k in 1..n {
        sum += a[n - k] * u[k];
    }
    sum * dt
}

/// Solved for the slowly varying `u = e^{i Omega t} c`, which obeys the same
/// equation with kernel `alpha(tau) e^{i Omega tau}`; the free rotation is then exact.
pub fn solve_amplitude(kernel: &BathKernel, omega: f64, grid: &TimeGrid) -> Result<AmplitudeResponse> {
    check_coverage(kernel, grid)?;
    let dt = grid.dt();
    let n = grid.len();
    let a: Vec<C64> = (0..n).map(|k| kernel.alpha(k as isize) * C64::from_polar(1.0, omega * grid.t(k))).collect();
    let mut u = Vec::with_capacity(n);
    let mut mem = Vec::with_capacity(n);
    u.push(C64::new(1.0, 0.0));
    mem.push(C64::new(0.0, 0.0));
    for i in 0..n - 1 {
        let f0 = -mem[i];
        let pred = u[i] + f0 * dt;
        let f1 = -amplitude_memory(&a, &u, pred, i + 1, dt);
        let next = u[i] + (f0 + f1) * (0.5 * dt);
        let m = amplitude_memory(&a, &u, next, i + 1, dt);
        u.push(next);
        mem.push(m);
    }
    let c: Vec<C64> = u.iter().enumerate().map(|(i, u)| u * C64::from_polar(1.0, -omega * grid.t(i))).collect();
    let mut big_c = Vec::with_capacity(n);
    let mut flagged = Vec::with_capacity(n);
    for (ui, mi) in u.iter().zip(&mem) {
        if ui.norm() < EPS_DIV {
            big_c.push(C64::new(f64::NAN, f64::NAN));
            flagged.push(true);
        } else {
            big_c.push(mi / ui);
            flagged.push(false);
        }
    }
    // A zero crossed between samples leaves both neighbours finite; catch it
    // on the linear interpolant.
    for i in 0..n - 1 {
        if segment_distance(u[i], u[i + 1]) < EPS_DIV {
            for k in [i, i + 1] {
                big_c[k] = C64::new(f64::NAN, f64::NAN);
                flagged[k] = true;
            }
        }
    }
    Ok(AmplitudeResponse { grid: *grid, amp_c: c, big_c, flagged })
}

/// Distance from the origin to the segment `[a, b]` of the complex plane.
fn segment_distance(a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    let s = (-(a.conj() * d).re / len2).clamp(0.0, 1.0);
    (a + d * s).norm()
}

/// Classical trajectory for `q'' + Omega^2 q + (2/M) int_0^s eta(s - s') q(s') ds' = 0`,
/// `q(0) = 0`, `q'(0) = Omega`.
#[derive(Debug, Clone)]
pub struct ClassicalSolution {
    grid: TimeGrid,
    pub omega: f64,
    pub mass: f64,
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub q_ddot: Vec<f64>,
    pub q_dddot: Vec<f64>,
}

impl ClassicalSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `D = q'^2 - q q''` at grid index `i`.
    pub fn denominator(&self, i: usize) -> f64 {
        self.q_dot[i] * self.q_dot[i] - self.q[i] * self.q_ddot[i]
    }
}

/// `int_0^{t_m} eta(u) h(t_m - u) du` by composite Simpson on the grid; the
/// `u = 0` node drops out because `eta(0) = 0`, so only `h_0..h_{m-1}` enter.
fn classical_memory(kernel: &BathKernel, h: &[f64], m: usize, dt: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let w = QuadratureRule::SimpsonComposite.weights(m, dt);
    (1..=m).map(|l| w[l] * kernel.eta(l as isize) * h[m - l]).sum()
}

/// Both `q` and `q'` obey the memory equation (the latter because `q(0) = 0`),
/// so each is advanced by a Numerov step; the memory at the new time is explicit
/// since `eta(0) = 0`. The first step uses the Taylor expansion at `s = 0`.
/// `q''` and `q'''` are read off the equation for `q` and `q'` respectively.
pub fn solve_classical_motion(kernel: &BathKernel, omega: f64, mass: f64, grid: &TimeGrid) -> Result<ClassicalSolution> {
    check_coverage(kernel, grid)?;
    if !(omega > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidParameter("omega and mass must be positive".into()));
    }
    let dt = grid.dt();
    let n = grid.len();
    let k2 = 2.0 / mass;
    let w2 = omega * omega;
    let fifth = omega.powi(5) - k2 * kernel.eta_dot(0) * omega;

    let solve = |y0: f64, y1: f64| -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; n];
        let mut f = vec![0.0; n];
        y[0] = y0;
        y[1] = y1;
        f[0] = -w2 * y0;
        f[1] = -w2 * y1 - k2 * classical_memory(kernel, &y, 1, dt);
        let c = dt * dt / 12.0;
        for i in 1..n - 1 {
            let mem = k2 * classical_memory(kernel, &y, i + 1, dt);
            y[i + 1] = (2.0 * y[i] - y[i - 1] + c * (-mem + 10.0 * f[i] + f[i - 1])) / (1.0 + c * w2);
            f[i + 1] = -w2 * y[i + 1] - mem;
        }
        (y, f)
    };
    let (q, q_ddot) = solve(0.0, omega * dt - w2 * omega * dt.powi(3) / 6.0 + fifth * dt.powi(5) / 120.0);
    let (q_dot, q_dddot) = solve(omega, omega - w2 * omega * dt * dt / 2.0 + fifth * dt.powi(4) / 24.0);
    Ok(ClassicalSolution { grid: *grid, omega, mass, q, q_dot, q_ddot, q_dddot })
}
