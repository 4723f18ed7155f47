//! Density-matrix propagation: Lindblad, generic convolutionless, exact RWA
//! and exact QBM master equations, plus observables and distances.
//!
//! All propagators work in the interaction picture of the system Hamiltonian
//! (its eigenbasis), so the unitary part is exact and the classical
//! fourth-order Runge-Kutta step only acts on the dissipative generator.

use crate::error::{Error, Result};
use crate::grid::{OperatorSeries, Series, TimeGrid};
use crate::linalg::{
    anticommutator, commutator, hermitian_eigenvalues, hermiticity_defect, max_abs, rotate, symmetrize, unrotate, CMatrix,
    EigenFrame, C64, I,
};
use crate::memory::AmplitudeResponse;
use crate::qbm::QbmMeCoeffs;
use crate::system::SystemModel;

/// Density matrices at sample times.
#[derive(Debug, Clone)]
pub struct DensitySeries {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    /// Largest Hermiticity defect removed by symmetrization during propagation.
    pub hermiticity_defect: f64,
}

impl DensitySeries {
    pub fn new(times: Vec<f64>, states: Vec<CMatrix>) -> Self {
        Self { times, states, hermiticity_defect: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &CMatrix {
        self.states.last().expect("series is never empty")
    }

    /// Smallest eigenvalue over the series; negative values signal positivity loss.
    pub fn min_eigenvalue(&self) -> f64 {
        self.states.iter().map(|r| hermitian_eigenvalues(r)[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn trace_normalized(&self) -> Self {
        Self {
            times: self.times.clone(),
            states: self.states.iter().map(|r| r / r.trace()).collect(),
            hermiticity_defect: self.hermiticity_defect,
        }
    }
}

/// Non-unitary part of a master equation, evaluated in the Schrödinger picture.
pub trait Dissipator: Sync {
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix;
}

impl<F> Dissipator for F
where
    F: Fn(f64, &CMatrix) -> CMatrix + Sync,
{
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        self(t, rho)
    }
}

fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// An entry of magnitude beyond this (or a non-finite one) aborts propagation.
pub const INSTABILITY_BOUND: f64 = 1e6;

/// Propagate `rho' = -(i/hbar)[H, rho] + D(t, rho)` with `D` given in the eigenbasis of `H`.
///
/// Samples every `stride` steps starting at `t = 0`.
pub fn propagate(
    frame: &EigenFrame,
    dissipator: &dyn Dissipator,
    rho0: &CMatrix,
    grid: &TimeGrid,
    stride: usize,
) -> Result<DensitySeries> {
    check_square(rho0, frame.dim())?;
    let stride = stride.max(1);
    let dt = grid.dt();
    let mut rho = frame.op_into(rho0);
    let mut out = DensitySeries::new(vec![0.0], vec![rho0.clone()]);
    let gen = |t: f64, r: &CMatrix| -> CMatrix {
        let ph = frame.phases(t);
        unrotate(&dissipator.apply(t, &rotate(r, &ph)), &ph)
    };
    for n in 0..grid.n_steps() {
        let t = grid.t(n);
        let k1 = gen(t, &rho);
        let k2 = gen(t + 0.5 * dt, &(&rho + &k1 * C64::from(0.5 * dt)));
        let k3 = gen(t + 0.5 * dt, &(&rho + &k2 * C64::from(0.5 * dt)));
        let k4 = gen(t + dt, &(&rho + &k3 * C64::from(dt)));
        rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0);
        let size = max_abs(&rho);
        if !(size < INSTABILITY_BOUND) {
            return Err(Error::Instability { t: grid.t(n + 1), magnitude: size });
        }
        out.hermiticity_defect = out.hermiticity_defect.max(hermiticity_defect(&rho));
        symmetrize(&mut rho);
        if (n + 1) % stride == 0 {
            let t1 = grid.t(n + 1);
            out.times.push(t1);
            out.states.push(frame.op_out(&rotate(&rho, &frame.phases(t1))));
        }
    }
    Ok(out)
}

/// `D = L rho L^dagger - {L^dagger L, rho} / 2`.
pub fn integrate_lindblad(h: &CMatrix, l: &CMatrix, rho0: &CMatrix, grid: &TimeGrid, hbar: f64, stride: usize) -> Result<DensitySeries> {
    check_square(l, h.nrows())?;
    let frame = EigenFrame::new(h, hbar);
    let l = frame.op_into(l);
    let ld = l.adjoint();
    let ldl = &ld * &l;
    let d = move |_t: f64, r: &CMatrix| -> CMatrix { &l * r * &ld - anticommutator(&ldl, r) * C64::from(0.5) };
    propagate(&frame, &d, rho0, grid, stride)
}

/// `D = [L, rho Obar^dagger(t)] + [Obar(t) rho, L^dagger]`.
pub fn integrate_convolutionless_me(
    h: &CMatrix,
    l: &CMatrix,
    obar: &OperatorSeries,
    rho0: &CMatrix,
    grid: &TimeGrid,
    hbar: f64,
    stride: usize,
) -> Result<DensitySeries> {
    check_square(l, h.nrows())?;
    if !obar.grid().covers(grid) {
        return Err(Error::InvalidParameter("operator series does not cover the propagation grid".into()));
    }
    let frame = EigenFrame::new(h, hbar);
    let l = frame.op_into(l);
    let ld = l.adjoint();
    let obar = obar.map(|o| frame.op_into(o));
    let d = move |t: f64, r: &CMatrix| -> CMatrix {
        let o = obar.at(t);
        commutator(&l, &(r * o.adjoint())) + commutator(&(&o * r), &ld)
    };
    propagate(&frame, &d, rho0, grid, stride)
}

/// `rho' = -(i/hbar)[H, rho] - i Im C [a^dagger a, rho] + Re C ([a, rho a^dagger] + [a rho, a^dagger])`.
pub fn integrate_rwa_exact(
    model: &SystemModel,
    response: &AmplitudeResponse,
    rho0: &CMatrix,
    grid: &TimeGrid,
    stride: usize,
) -> Result<DensitySeries> {
    let c = response.c_series()?;
    integrate_rwa_series(model, &c, rho0, grid, stride)
}

/// As [`integrate_rwa_exact`] for a given `C(t)` series.
pub fn integrate_rwa_series(model: &SystemModel, c: &Series<C64>, rho0: &CMatrix, grid: &TimeGrid, stride: usize) -> Result<DensitySeries> {
    if !c.grid().covers(grid) {
        return Err(Error::InvalidParameter("C(t) series does not cover the propagation grid".into()));
    }
    let frame = EigenFrame::new(&model.h, model.hbar);
    let a = frame.op_into(&model.a);
    let ad = a.adjoint();
    let num = &ad * &a;
    let d = move |t: f64, r: &CMatrix| -> CMatrix {
        let ct = c.at(t);
        commutator(&num, r) * (-I * ct.im)
            + (commutator(&a, &(r * &ad)) + commutator(&(&a * r), &ad)) * C64::from(ct.re)
    };
    propagate(&frame, &d, rho0, grid, stride)
}

/// `rho' = (1/i hbar)[H, rho] + (a/2i hbar)[q^2, rho] + (b/2i hbar)[q, {p, rho}]
///        + (c/hbar^2)[q, [p, rho]] - (d/hbar^2)[q, [q, rho]]`.
pub fn integrate_qbm_me(model: &SystemModel, coeffs: &QbmMeCoeffs, rho0: &CMatrix, grid: &TimeGrid, stride: usize) -> Result<DensitySeries> {
    let gen = QbmGenerator::new(model, coeffs, grid)?;
    let frame = EigenFrame::new(&model.h, model.hbar);
    let gen = QbmGenerator { q: frame.op_into(&gen.q), p: frame.op_into(&gen.p), q2: frame.op_into(&gen.q2), ..gen };
    propagate(&frame, &gen, rho0, grid, stride)
}

/// Dissipative part of the exact QBM master equation.
#[derive(Debug, Clone)]
pub struct QbmGenerator {
    q: CMatrix,
    p: CMatrix,
    q2: CMatrix,
    hbar: f64,
    coeffs: [Series<f64>; 4],
}

impl QbmGenerator {
    pub fn new(model: &SystemModel, coeffs: &QbmMeCoeffs, grid: &TimeGrid) -> Result<Self> {
        if !coeffs.grid().covers(grid) {
            return Err(Error::InvalidParameter("coefficient grid does not cover the propagation grid".into()));
        }
        if coeffs.c_pq.iter().chain(&coeffs.d_qq).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("diffusion coefficients were not computed".into()));
        }
        let q = model.q()?.clone();
        let p = model.p()?.clone();
        let q2 = &q * &q;
        Ok(Self { q, p, q2, hbar: model.hbar, coeffs: coeffs.series() })
    }

    /// Generator with explicit coefficients `(a, b, c, d)`.
    pub fn apply_with(&self, abcd: [f64; 4], rho: &CMatrix) -> CMatrix {
        let [a, b, c, d] = abcd;
        let h = self.hbar;
        let mi = -I / (2.0 * h);
        commutator(&self.q2, rho) * (mi * a)
            + commutator(&self.q, &anticommutator(&self.p, rho)) * (mi * b)
            + commutator(&self.q, &commutator(&self.p, rho)) * C64::from(c / (h * h))
            - commutator(&self.q, &commutator(&self.q, rho)) * C64::from(d / (h * h))
    }
}

impl Dissipator for QbmGenerator {
    fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let abcd = [0, 1, 2, 3].map(|k| self.coeffs[k].at(t));
        self.apply_with(abcd, rho)
    }
}

/// One row of the observable table; expectations are normalized by the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    /// `<a^dagger a>`, the excited population for the two-level system.
    pub number: f64,
    pub purity: f64,
    pub trace: f64,
}

/// Residue of `tr(rho X)` imaginary parts tolerated before they are discarded.
pub const IMAG_TOLERANCE: f64 = 1e-10;

fn real_expectation(rho: &CMatrix, x: &CMatrix, tr: C64) -> Result<f64> {
    let v = (rho * x).trace() / tr;
    if v.im.abs() > IMAG_TOLERANCE * v.norm().max(1.0) {
        return Err(Error::InvalidParameter(format!("expectation has imaginary residue {}", v.im)));
    }
    Ok(v.re)
}

/// Moments of `q`, `p` (oscillator) together with purity and raw trace.
/// For the two-level system the `q`/`p` columns are `NaN`.
pub fn observables(series: &DensitySeries, model: &SystemModel) -> Result<Vec<ObservableRow>> {
    let n_op = model.number();
    let ops = match (&model.q, &model.p) {
        (Some(q), Some(p)) => Some((q, p, q * q, p * p, anticommutator(q, p) * C64::from(0.5))),
        _ => None,
    };
    series
        .times
        .iter()
        .zip(&series.states)
        .map(|(&t, rho)| {
            let tr = rho.trace();
            let purity = ((rho * rho).trace() / (tr * tr)).re;
            let mut row = ObservableRow {
                t,
                q: f64::NAN,
                p: f64::NAN,
                var_q: f64::NAN,
                var_p: f64::NAN,
                cov_qp: f64::NAN,
                number: real_expectation(rho, &n_op, tr)?,
                purity,
                trace: tr.re,
            };
            if let Some((q, p, q2, p2, qp)) = &ops {
                row.q = real_expectation(rho, q, tr)?;
                row.p = real_expectation(rho, p, tr)?;
                row.var_q = real_expectation(rho, q2, tr)? - row.q * row.q;
                row.var_p = real_expectation(rho, p2, tr)? - row.p * row.p;
                row.cov_qp = real_expectation(rho, qp, tr)? - row.q * row.p;
            }
            Ok(row)
        })
        .collect()
}

/// `||A - B||_1 / 2` for Hermitian arguments.
pub fn trace_distance_matrix(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut d = a - b;
    symmetrize(&mut d);
    0.5 * hermitian_eigenvalues(&d).iter().map(|v| v.abs()).sum::<f64>()
}

pub fn trace_distance(a: &DensitySeries, b: &DensitySeries) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    for (ta, tb) in a.times.iter().zip(&b.times) {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("sample times differ: {ta} vs {tb}")));
        }
    }
    Ok(a.states.iter().zip(&b.states).map(|(x, y)| trace_distance_matrix(x, y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::projector;
    use crate::system::{build_system, SystemKind};

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn trace_distance_examples() {
        let a = diag(&[1.0, 0.0]);
        assert_eq!(trace_distance_matrix(&a, &a), 0.0);
        assert!((trace_distance_matrix(&a, &diag(&[0.0, 1.0])) - 1.0).abs() < 1e-15);
        assert!((trace_distance_matrix(&a, &diag(&[0.5, 0.5])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn observables_of_simple_states() {
        let s = build_system(1.3, 0.7, 0.9, 20, SystemKind::Oscillator).unwrap();
        let ground = projector(&s.basis_state(0));
        let rows = observables(&DensitySeries::new(vec![0.0], vec![ground]), &s).unwrap();
        assert!(rows[0].q.abs() < 1e-15 && rows[0].p.abs() < 1e-15);
        assert!((rows[0].var_q - 0.9 / (2.0 * 0.7 * 1.3)).abs() < 1e-13);
        let coh = projector(&s.coherent_state(C64::new(0.5, 0.2)));
        let rows = observables(&DensitySeries::new(vec![0.0], vec![coh]), &s).unwrap();
        assert!((rows[0].purity - 1.0).abs() < 1e-13);
        let tl = build_system(1.0, 1.0, 1.0, 2, SystemKind::TwoLevel).unwrap();
        let rows = observables(&DensitySeries::new(vec![0.0], vec![diag(&[0.5, 0.5])]), &tl).unwrap();
        assert!((rows[0].purity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_dissipator_is_unitary() {
        let s = build_system(1.0, 1.0, 1.0, 15, SystemKind::Oscillator).unwrap();
        let grid = TimeGrid::new(0.1, 50).unwrap();
        let beta = C64::new(0.7, 0.0);
        let rho0 = projector(&s.coherent_state(beta));
        let out = integrate_lindblad(&s.h, &CMatrix::zeros(15, 15), &rho0, &grid, 1.0, 10).unwrap();
        let exact = projector(&s.coherent_state(beta * C64::from_polar(1.0, -5.0)));
        assert!(trace_distance_matrix(out.last(), &exact) < 1e-12);
    }

    #[test]
    fn lindblad_two_level_relaxation() {
        let s = build_system(1.0, 1.0, 1.0, 2, SystemKind::TwoLevel).unwrap();
        let grid = TimeGrid::new(0.01, 500).unwrap();
        let l = &s.a * C64::from(0.6f64.sqrt());
        let out = integrate_lindblad(&s.h, &l, &diag(&[0.5, 0.5]), &grid, 1.0, 1).unwrap();
        let mut prev = 0.5;
        for (t, r) in out.times.iter().zip(&out.states) {
            let pe = r[(1, 1)].re;
            assert!(pe <= prev + 1e-15);
            assert!((pe - 0.5 * (-0.6 * t).exp()).abs() < 1e-9);
            prev = pe;
        }
    }

    #[test]
    fn runaway_generator_is_reported() {
        let s = build_system(1.0, 1.0, 1.0, 6, SystemKind::Oscillator).unwrap();
        let grid = TimeGrid::new(0.01, 2000).unwrap();
        let rho0 = projector(&s.basis_state(1));
        // Anti-damping: the "dissipator" pumps every element exponentially.
        let d = |_t: f64, r: &CMatrix| r * C64::from(20.0);
        let frame = EigenFrame::new(&s.h, 1.0);
        let r = propagate(&frame, &d, &rho0, &grid, 100);
        assert!(matches!(r, Err(Error::Instability { .. })));
    }
}