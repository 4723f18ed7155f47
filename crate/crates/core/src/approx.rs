//! Noise-independent approximations of the drift operator: weak coupling
//! (Redfield with initial slip) and the first two orders of the near-Markov expansion.

use crate::error::{Error, Result};
use crate::grid::{OperatorSeries, Series, TimeGrid};
use crate::kernels::BathKernel;
use crate::linalg::{commutator, CMatrix, EigenFrame, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxScheme {
    WeakCoupling,
    PostMarkov0,
    PostMarkov1,
}

#[derive(Debug, Clone)]
pub struct ApproxObar {
    pub scheme: ApproxScheme,
    pub obar: OperatorSeries,
    /// `A_0(t) = int_0^t alpha(s) ds`.
    pub a0: Series<C64>,
    /// `A_1(t) = int_0^t s alpha(s) ds`.
    pub a1: Series<C64>,
}

fn check_grid(kernel: &BathKernel, grid: &TimeGrid) -> Result<()> {
    let kg = kernel.grid();
    if (kg.dt() - grid.dt()).abs() > 1e-12 * grid.dt() || kg.n_steps() < grid.n_steps() {
        return Err(Error::InvalidParameter("kernel grid must share dt and cover the requested grid".into()));
    }
    Ok(())
}

/// Cumulative `A_0` and `A_1` by the trapezoid rule.
pub fn alpha_moments(kernel: &BathKernel, grid: &TimeGrid) -> Result<(Series<C64>, Series<C64>)> {
    check_grid(kernel, grid)?;
    let h = grid.dt();
    let mut a0 = vec![C64::new(0.0, 0.0); grid.len()];
    let mut a1 = a0.clone();
    for i in 1..grid.len() {
        let (l, r) = (kernel.alpha(i as isize - 1), kernel.alpha(i as isize));
        a0[i] = a0[i - 1] + 0.5 * h * (l + r);
        a1[i] = a1[i - 1] + 0.5 * h * (grid.t(i - 1) * l + grid.t(i) * r);
    }
    Ok((Series::new(*grid, a0)?, Series::new(*grid, a1)?))
}

/// Weights `(w0, w1)` with `int_0^h (a0 (1 - s/h) + a1 s/h) e^{-i w s} ds = w0 a0 + w1 a1`.
fn linear_phase_weights(omega: f64, h: f64) -> (C64, C64) {
    let th = omega * h;
    let (full, lin) = if th.abs() < 1e-3 {
        let t2 = th * th;
        (C64::new(1.0 - t2 / 6.0, -th / 2.0 + th * t2 / 24.0), C64::new(0.5 - t2 / 8.0, -th / 3.0 + th * t2 / 30.0))
    } else {
        let e = C64::from_polar(1.0, -th);
        let full = (C64::from(1.0) - e) / (I * th);
        let lin = I * e / th - (C64::from(1.0) - e) / (th * th);
        (full, lin)
    };
    (h * (full - lin), h * lin)
}

/// `Obar_0(t) = int_0^t alpha(s) e^{-iHs/hbar} L e^{iHs/hbar} ds`.
///
/// In the eigenbasis of `H` the integrand of each matrix element is `alpha(s)`
/// times a pure phase; the phase is integrated exactly against a piecewise-linear
/// `alpha`, so large Bohr frequencies do not degrade the accuracy.
pub fn weak_coupling_obar(h: &CMatrix, l: &CMatrix, kernel: &BathKernel, grid: &TimeGrid, hbar: f64) -> Result<ApproxObar> {
    if h.nrows() != l.nrows() || h.ncols() != l.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: l.nrows() });
    }
    let (a0, a1) = alpha_moments(kernel, grid)?;
    let frame = EigenFrame::new(h, hbar);
    let lf = frame.op_into(l);
    let e = frame.energies();
    let n = lf.nrows();
    let dt = grid.dt();
    let mut acc = vec![C64::new(0.0, 0.0); n * n];
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let w = (e[j] - e[k]) / hbar;
            let (w0, w1) = linear_phase_weights(w, dt);
            weights.push((w, w0, w1));
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    values.push(CMatrix::zeros(n, n));
    for i in 1..grid.len() {
        let (al, ar) = (kernel.alpha(i as isize - 1), kernel.alpha(i as isize));
        let t0 = grid.t(i - 1);
        for (idx, &(w, w0, w1)) in weights.iter().enumerate() {
            acc[idx] += C64::from_polar(1.0, -w * t0) * (w0 * al + w1 * ar);
        }
        let m = CMatrix::from_fn(n, n, |j, k| lf[(j, k)] * acc[j * n + k]);
        values.push(frame.op_out(&m));
    }
    Ok(ApproxObar { scheme: ApproxScheme::WeakCoupling, obar: Series::new(*grid, values)?, a0, a1 })
}

/// `Obar = A_0 L + A_1 (-(i/hbar)[H, L] + A_0 [L, L^dagger] L)`; order 0 keeps the first term only.
pub fn post_markov_obar(h: &CMatrix, l: &CMatrix, kernel: &BathKernel, grid: &TimeGrid, hbar: f64, order: usize) -> Result<ApproxObar> {
    if order > 1 {
        return Err(Error::InvalidParameter(format!("post-Markov order must be 0 or 1, got {order}")));
    }
    if h.nrows() != l.nrows() || h.ncols() != l.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: l.nrows() });
    }
    let (a0, a1) = alpha_moments(kernel, grid)?;
    let hl = commutator(h, l) * (-I / hbar);
    let lll = commutator(l, &l.adjoint()) * l;
    let values = (0..grid.len())
        .map(|i| {
            let (x0, x1) = (a0.get(i), a1.get(i));
            let mut o = l * *x0;
            if order == 1 {
                o += &hl * *x1 + &lll * (*x1 * *x0);
            }
            o
        })
        .collect();
    let scheme = if order == 0 { ApproxScheme::PostMarkov0 } else { ApproxScheme::PostMarkov1 };
    Ok(ApproxObar { scheme, obar: Series::new(*grid, values)?, a0, a1 })
}
