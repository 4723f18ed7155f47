//! Linear stochastic Schrödinger equations and ensemble reduction.
//!
//! Every integrator uses a Heun step in the interaction picture of the system
//! Hamiltonian: with `U = exp(-i H dt / hbar)` and a step operator `Delta(t)`,
//!
//! ```text
//! psi~      = U (psi + Delta(t_n) psi)
//! psi_{n+1} = U (psi + Delta(t_n) psi / 2) + Delta(t_{n+1}) psi~ / 2
//! ```
//!
//! For colored noise `Delta(t) = dt K(t)` is evaluated pathwise at the step
//! endpoints; for white noise `Delta` carries the Wiener increment of the step
//! at both endpoints (Stratonovich Heun).

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{OperatorSeries, TimeGrid};
use crate::linalg::{CMatrix, CVector, EigenFrame, C64, I};
use crate::master::DensitySeries;
use crate::noise::{circular_normal, trajectory_rng, NoisePath};
use crate::qbm::QbmSseCoeffs;
use crate::system::SystemModel;

/// Relative tail population above which a run is flagged as truncation-limited.
pub const EPS_TRUNC: f64 = 1e-6;
/// Growth of the squared norm beyond this aborts a trajectory.
pub const NORM_GROWTH_LIMIT: f64 = 1e12;

/// Unnormalized states of one trajectory at the sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub seed: u64,
    pub trajectory_index: u64,
    /// Largest relative population of the top two basis states during the run.
    pub tail_population: f64,
}

impl TrajectoryRecord {
    pub fn truncation_flagged(&self) -> bool {
        self.tail_population > EPS_TRUNC
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm()).collect()
    }
}

/// Grid indices at which states are recorded.
pub fn sample_indices(grid: &TimeGrid, stride: usize) -> Vec<usize> {
    (0..=grid.n_steps()).step_by(stride.max(1)).collect()
}

/// Shared Heun driver. `delta(i, step, psi, out)` writes `Delta(t_i) psi` for the
/// step `step` (from `t_step` to `t_step + dt`), with `i` either `step` or `step + 1`.
fn heun<F>(
    model: &SystemModel,
    frame: &EigenFrame,
    grid: &TimeGrid,
    psi0: &CVector,
    stride: usize,
    mut delta: F,
) -> Result<(Vec<f64>, Vec<CVector>, f64)>
where
    F: FnMut(usize, usize, &CVector, &mut CVector),
{
    if psi0.len() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: psi0.len() });
    }
    let stride = stride.max(1);
    let u = frame.phases(grid.dt());
    let norm0 = psi0.norm_squared().max(f64::MIN_POSITIVE);
    let mut psi = frame.vec_into(psi0);
    let mut d0 = CVector::zeros(model.dim);
    let mut d1 = CVector::zeros(model.dim);
    let mut pred = CVector::zeros(model.dim);
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut tail = model.tail_population(psi0);
    for n in 0..grid.n_steps() {
        delta(n, n, &psi, &mut d0);
        for k in 0..model.dim {
            pred[k] = u[k] * (psi[k] + d0[k]);
        }
        delta(n + 1, n, &pred, &mut d1);
        for k in 0..model.dim {
            psi[k] = u[k] * (psi[k] + 0.5 * d0[k]) + 0.5 * d1[k];
        }
        let norm = psi.norm_squared();
        if !(norm <= NORM_GROWTH_LIMIT * norm0) {
            return Err(Error::Instability { t: grid.t(n + 1), magnitude: norm.sqrt() });
        }
        tail = tail.max(model.tail_population(&psi));
        if (n + 1) % stride == 0 {
            times.push(grid.t(n + 1));
            states.push(frame.vec_out(&psi));
        }
    }
    Ok((times, states, tail))
}

/// `out = M x` without allocating.
#[inline]
fn gemv(m: &CMatrix, x: &CVector, out: &mut CVector, scale: C64) {
    out.gemv(scale, m, x, C64::new(0.0, 0.0));
}

#[inline]
fn gemv_add(m: &CMatrix, x: &CVector, out: &mut CVector, scale: C64) {
    out.gemv(scale, m, x, C64::new(1.0, 0.0));
}

/// Convolutionless SSE `psi' = (-iH/hbar + L z*_t - L^dagger Obar(t)) psi`
/// driven by a colored noise path, with the drift operator precomputed on the grid.
#[derive(Debug, Clone)]
pub struct ConvolutionlessSse {
    model: SystemModel,
    frame: EigenFrame,
    grid: TimeGrid,
    l: CMatrix,
    /// `-L^dagger Obar(t_i)` in the frame basis.
    drift: Vec<CMatrix>,
    stride: usize,
}

impl ConvolutionlessSse {
    pub fn new(model: &SystemModel, l: &CMatrix, obar: &OperatorSeries, grid: &TimeGrid, stride: usize) -> Result<Self> {
        if l.nrows() != model.dim || l.ncols() != model.dim {
            return Err(Error::DimensionMismatch { expected: model.dim, found: l.nrows() });
        }
        if !obar.grid().covers(grid) {
            return Err(Error::InvalidParameter("operator series does not cover the trajectory grid".into()));
        }
        let frame = EigenFrame::new(&model.h, model.hbar);
        let l = frame.op_into(l);
        let ld = l.adjoint();
        let drift = grid.times().map(|t| -(&ld * frame.op_into(&obar.at(t)))).collect();
        Ok(Self { model: model.clone(), frame, grid: *grid, l, drift, stride })
    }

    pub fn run(&self, noise: &NoisePath, psi0: &CVector) -> Result<TrajectoryRecord> {
        if noise.z_star.len() < self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: noise.z_star.len() });
        }
        let dt = C64::from(self.grid.dt());
        let (times, states, tail) = heun(&self.model, &self.frame, &self.grid, psi0, self.stride, |i, _, psi, out| {
            gemv(&self.l, psi, out, dt * noise.z_star[i]);
            gemv_add(&self.drift[i], psi, out, dt);
        })?;
        Ok(TrajectoryRecord { times, states, seed: noise.seed, trajectory_index: noise.trajectory_index, tail_population: tail })
    }

    /// The same equation driven by white noise: `L z*_t dt` becomes `L dW*` with
    /// `M{|dW|^2} = dt`, drawn from the trajectory's own stream.
    pub fn run_white(&self, seed: u64, index: u64, psi0: &CVector) -> Result<TrajectoryRecord> {
        let mut rng = trajectory_rng(seed, index);
        let sdt = self.grid.dt().sqrt();
        let dw: Vec<C64> = (0..self.grid.n_steps()).map(|_| (circular_normal(&mut rng) * sdt).conj()).collect();
        let dt = C64::from(self.grid.dt());
        let (times, states, tail) = heun(&self.model, &self.frame, &self.grid, psi0, self.stride, |i, step, psi, out| {
            gemv(&self.l, psi, out, dw[step]);
            gemv_add(&self.drift[i], psi, out, dt);
        })?;
        Ok(TrajectoryRecord { times, states, seed, trajectory_index: index, tail_population: tail })
    }
}

/// Single convolutionless trajectory.
pub fn integrate_convolutionless(
    model: &SystemModel,
    l: &CMatrix,
    obar: &OperatorSeries,
    noise: &NoisePath,
    psi0: &CVector,
    stride: usize,
) -> Result<TrajectoryRecord> {
    ConvolutionlessSse::new(model, l, obar, noise.grid(), stride)?.run(noise, psi0)
}

/// QBM SSE `hbar psi' = -iH psi + q (z*_t - M Omega F q - G p + i int J(t,s) z*_s ds) psi`.
#[derive(Debug, Clone)]
pub struct QbmSse {
    model: SystemModel,
    frame: EigenFrame,
    grid: TimeGrid,
    q: CMatrix,
    /// `-(M Omega F(t_i) q^2 + G(t_i) q p) / hbar` in the frame basis.
    drift: Vec<CMatrix>,
    j_int: Vec<Vec<C64>>,
    stride: usize,
}

impl QbmSse {
    pub fn new(model: &SystemModel, coeffs: &QbmSseCoeffs, stride: usize) -> Result<Self> {
        let grid = *coeffs.grid();
        let frame = EigenFrame::new(&model.h, model.hbar);
        let q = frame.op_into(model.q()?);
        let p = frame.op_into(model.p()?);
        let q2 = &q * &q;
        let qp = &q * &p;
        let mw = model.mass * model.omega;
        let inv = 1.0 / model.hbar;
        let drift = (0..grid.len())
            .map(|i| (&q2 * (coeffs.big_f[i] * mw) + &qp * coeffs.big_g[i]) * C64::from(-inv))
            .collect();
        Ok(Self { model: model.clone(), frame, grid, q: q * C64::from(inv), drift, j_int: coeffs.j_int.clone(), stride })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `z*_t + i int_0^t J(t, s) z*_s ds` by the trapezoid rule.
    pub fn drive(&self, noise: &NoisePath, i: usize) -> C64 {
        let dt = self.grid.dt();
        let row = &self.j_int[i];
        let mut hist = C64::new(0.0, 0.0);
        if i > 0 {
            hist = 0.5 * (row[0] * noise.z_star[0] + row[i] * noise.z_star[i]);
            for s in 1..i {
                hist += row[s] * noise.z_star[s];
            }
            hist *= dt;
        }
        noise.z_star[i] + I * hist
    }

    pub fn run(&self, noise: &NoisePath, psi0: &CVector) -> Result<TrajectoryRecord> {
        if noise.z_star.len() < self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: noise.z_star.len() });
        }
        let drives: Vec<C64> = (0..self.grid.len()).map(|i| self.drive(noise, i)).collect();
        let dt = C64::from(self.grid.dt());
        let (times, states, tail) = heun(&self.model, &self.frame, &self.grid, psi0, self.stride, |i, _, psi, out| {
            gemv(&self.q, psi, out, dt * drives[i]);
            gemv_add(&self.drift[i], psi, out, dt);
        })?;
        Ok(TrajectoryRecord { times, states, seed: noise.seed, trajectory_index: noise.trajectory_index, tail_population: tail })
    }
}

pub fn integrate_qbm_sse(model: &SystemModel, coeffs: &QbmSseCoeffs, noise: &NoisePath, psi0: &CVector, stride: usize) -> Result<TrajectoryRecord> {
    QbmSse::new(model, coeffs, stride)?.run(noise, psi0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    TraceNormalized,
}

/// Mean of `|psi><psi|` over records, summed pairwise in index order.
pub fn ensemble_density(records: &[TrajectoryRecord], normalize: Normalization) -> Result<DensitySeries> {
    let first = records.first().ok_or_else(|| Error::InvalidParameter("no trajectories".into()))?;
    let n_times = first.states.len();
    if let Some(r) = records.iter().find(|r| r.states.len() != n_times) {
        return Err(Error::DimensionMismatch { expected: n_times, found: r.states.len() });
    }
    let mut acc = PairwiseSum::default();
    for r in records {
        acc.push(outer_products(r));
    }
    let sum = acc.finish().expect("at least one record");
    Ok(finish_density(first.times.clone(), sum, records.len(), normalize))
}

fn outer_products(r: &TrajectoryRecord) -> Vec<CMatrix> {
    r.states.iter().map(|s| s * s.adjoint()).collect()
}

fn finish_density(times: Vec<f64>, sum: Vec<CMatrix>, n: usize, normalize: Normalization) -> DensitySeries {
    let inv = C64::from(1.0 / n as f64);
    let states = sum
        .into_iter()
        .map(|mut m| {
            m *= inv;
            crate::linalg::symmetrize(&mut m);
            if normalize == Normalization::TraceNormalized {
                let tr = m.trace();
                m /= tr;
            }
            m
        })
        .collect();
    DensitySeries::new(times, states)
}

/// Binary-counter cascade: level `k` holds the sum of an aligned block of `2^k` terms.
#[derive(Debug, Default)]
struct PairwiseSum {
    levels: Vec<Option<Vec<CMatrix>>>,
}

impl PairwiseSum {
    fn push(&mut self, mut item: Vec<CMatrix>) {
        let mut k = 0;
        loop {
            if k == self.levels.len() {
                self.levels.push(None);
            }
            match self.levels[k].take() {
                None => {
                    self.levels[k] = Some(item);
                    return;
                }
                Some(prev) => {
                    item = add_series(prev, item);
                    k += 1;
                }
            }
        }
    }

    fn finish(self) -> Option<Vec<CMatrix>> {
        self.levels.into_iter().flatten().reduce(add_series)
    }
}

fn add_series(mut a: Vec<CMatrix>, b: Vec<CMatrix>) -> Vec<CMatrix> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Per-time mean and standard error of `<psi|X|psi>` over an ensemble.
#[derive(Debug, Clone)]
pub struct TrackedObservable {
    pub mean: Vec<C64>,
    /// Standard errors of the real and imaginary parts.
    pub stderr: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Raw mean of outer products.
    pub density: DensitySeries,
    pub n_traj: usize,
    pub tracked: Vec<TrackedObservable>,
    pub max_tail_population: f64,
    pub truncation_flagged: usize,
}

#[derive(Debug, Clone)]
struct BlockSum {
    rho: Vec<CMatrix>,
    /// Per tracked operator and time: `(sum, sum re^2, sum im^2)`.
    moments: Vec<Vec<(C64, f64, f64)>>,
    tail: f64,
    flagged: usize,
    times: Vec<f64>,
}

/// Trajectories per block; blocks are summed in parallel and combined in order,
/// so the result does not depend on the worker count.
pub const ENSEMBLE_BLOCK: usize = 32;

/// Run trajectories `0..n_traj` through `run` and reduce them deterministically.
pub fn run_ensemble<F>(n_traj: usize, workers: usize, tracked: &[CMatrix], run: F) -> Result<EnsembleResult>
where
    F: Fn(u64) -> Result<TrajectoryRecord> + Sync + Send,
{
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let n_blocks = n_traj.div_ceil(ENSEMBLE_BLOCK);
    let wave = pool.current_num_threads().max(1) * 2;
    let block = |b: usize| -> Result<BlockSum> {
        let lo = b * ENSEMBLE_BLOCK;
        let hi = (lo + ENSEMBLE_BLOCK).min(n_traj);
        let mut out: Option<BlockSum> = None;
        for idx in lo..hi {
            let r = run(idx as u64)?;
            let rho = outer_products(&r);
            let moments: Vec<Vec<(C64, f64, f64)>> = tracked
                .iter()
                .map(|x| {
                    r.states
                        .iter()
                        .map(|s| {
                            let v = s.dotc(&(x * s));
                            (v, v.re * v.re, v.im * v.im)
                        })
                        .collect()
                })
                .collect();
            let flagged = usize::from(r.truncation_flagged());
            match out.as_mut() {
                None => {
                    out = Some(BlockSum { rho, moments, tail: r.tail_population, flagged, times: r.times });
                }
                Some(acc) => {
                    if acc.rho.len() != rho.len() {
                        return Err(Error::DimensionMismatch { expected: acc.rho.len(), found: rho.len() });
                    }
                    for (a, b) in acc.rho.iter_mut().zip(rho) {
                        *a += b;
                    }
                    for (am, bm) in acc.moments.iter_mut().zip(moments) {
                        for (a, b) in am.iter_mut().zip(bm) {
                            a.0 += b.0;
                            a.1 += b.1;
                            a.2 += b.2;
                        }
                    }
                    acc.tail = acc.tail.max(r.tail_population);
                    acc.flagged += flagged;
                }
            }
        }
        Ok(out.expect("blocks are nonempty"))
    };

    let mut rho_sum = PairwiseSum::default();
    let mut moments: Option<Vec<Vec<(C64, f64, f64)>>> = None;
    let mut tail: f64 = 0.0;
    let mut flagged = 0;
    let mut times = Vec::new();
    for start in (0..n_blocks).step_by(wave) {
        let end = (start + wave).min(n_blocks);
        let sums: Vec<Result<BlockSum>> = pool.install(|| (start..end).into_par_iter().map(block).collect());
        for s in sums {
            let s = s?;
            rho_sum.push(s.rho);
            match moments.as_mut() {
                None => moments = Some(s.moments),
                Some(m) => {
                    for (am, bm) in m.iter_mut().zip(s.moments) {
                        for (a, b) in am.iter_mut().zip(bm) {
                            a.0 += b.0;
                            a.1 += b.1;
                            a.2 += b.2;
                        }
                    }
                }
            }
            tail = tail.max(s.tail);
            flagged += s.flagged;
            times = s.times;
        }
    }
    let n = n_traj as f64;
    let tracked = moments
        .unwrap_or_default()
        .into_iter()
        .map(|m| {
            let mean: Vec<C64> = m.iter().map(|(s, _, _)| s / n).collect();
            let stderr = m
                .iter()
                .zip(&mean)
                .map(|((_, sr, si), mu)| {
                    let var = |sq: f64, m: f64| ((sq / n - m * m) * n / (n - 1.0).max(1.0)).max(0.0);
                    ((var(*sr, mu.re) / n).sqrt(), (var(*si, mu.im) / n).sqrt())
                })
                .collect();
            TrackedObservable { mean, stderr }
        })
        .collect();
    let density = finish_density(times, rho_sum.finish().expect("n_traj >= 1"), n_traj, Normalization::Raw);
    Ok(EnsembleResult { density, n_traj, tracked, max_tail_population: tail, truncation_flagged: flagged })
}

/// Linear Markov QSD `psi' = (-iH/hbar + sqrt(gamma) L z*_t - gamma L^dagger L / 2) psi`
/// with white noise, as an ensemble.
#[allow(clippy::too_many_arguments)]
pub fn integrate_markov_qsd(
    model: &SystemModel,
    l: &CMatrix,
    gamma: f64,
    psi0: &CVector,
    grid: &TimeGrid,
    seed: u64,
    n_traj: usize,
    stride: usize,
    workers: usize,
    tracked: &[CMatrix],
) -> Result<EnsembleResult> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
    }
    let ls = l * C64::from(gamma.sqrt());
    let obar = OperatorSeries::constant(*grid, &ls * C64::from(0.5));
    let sse = ConvolutionlessSse::new(model, &ls, &obar, grid, stride)?;
    run_ensemble(n_traj, workers, tracked, |i| sse.run_white(seed, i, psi0))
}

/// Draw a fresh circular Gaussian; exposed for callers building their own drives.
pub fn white_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> C64 {
    circular_normal(rng) * dt.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::projector;
    use crate::system::{build_system, SystemKind};

    #[test]
    fn zero_noise_zero_drift_is_unitary() {
        let s = build_system(1.0, 1.0, 1.0, 20, SystemKind::Oscillator).unwrap();
        let grid = TimeGrid::new(0.05, 200).unwrap();
        let obar = OperatorSeries::constant(grid, CMatrix::zeros(20, 20));
        let beta = C64::new(1.0, 0.5);
        let r = integrate_convolutionless(&s, &s.a, &obar, &NoisePath::zero(grid), &s.coherent_state(beta), 50).unwrap();
        assert_eq!(r.states.len(), 5);
        let exact = s.coherent_state(beta * C64::from_polar(1.0, -10.0));
        assert!((r.states[4].dotc(&exact).norm() - 1.0).abs() < 1e-12);
        assert!((r.states[4].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_ensemble_examples() {
        let s = build_system(1.0, 1.0, 1.0, 2, SystemKind::TwoLevel).unwrap();
        let rec = |v: CVector| TrajectoryRecord { times: vec![0.0], states: vec![v], seed: 0, trajectory_index: 0, tail_population: 0.0 };
        let rho = ensemble_density(&[rec(s.basis_state(0)), rec(s.basis_state(1))], Normalization::TraceNormalized).unwrap();
        assert!((rho.states[0][(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho.states[0][(1, 1)].re - 0.5).abs() < 1e-15);
        let single = ensemble_density(&[rec(s.basis_state(1))], Normalization::Raw).unwrap();
        assert_eq!(single.states[0], projector(&s.basis_state(1)));
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let s = build_system(1.0, 1.0, 1.0, 8, SystemKind::Oscillator).unwrap();
        let grid = TimeGrid::new(0.05, 40).unwrap();
        let psi0 = s.coherent_state(C64::new(0.5, 0.0));
        let a = integrate_markov_qsd(&s, &s.a, 0.2, &psi0, &grid, 7, 100, 10, 1, std::slice::from_ref(&s.a)).unwrap();
        let b = integrate_markov_qsd(&s, &s.a, 0.2, &psi0, &grid, 7, 100, 10, 3, std::slice::from_ref(&s.a)).unwrap();
        assert_eq!(a.density.states, b.density.states);
        assert_eq!(a.tracked[0].mean, b.tracked[0].mean);
    }

    #[test]
    fn unstable_growth_is_reported() {
        let s = build_system(1.0, 1.0, 1.0, 6, SystemKind::Oscillator).unwrap();
        let grid = TimeGrid::new(0.1, 100).unwrap();
        // Obar = -50 L makes the drift +50 L^dagger L.
        let obar = OperatorSeries::constant(grid, &s.a * C64::from(-50.0));
        let r = integrate_convolutionless(&s, &s.a, &obar, &NoisePath::zero(grid), &s.basis_state(3), 1);
        assert!(matches!(r, Err(Error::Instability { .. })));
    }
}
