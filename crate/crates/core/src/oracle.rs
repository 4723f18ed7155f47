//! Brute-force reference: the system plus a few truncated bath oscillators,
//! propagated as a pure state and traced down to the system.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::DiscreteBath;
use crate::linalg::{symmetrize, CMatrix, CVector, CsrMatrix, C64, I};
use crate::master::{trace_distance, DensitySeries};
use crate::system::{annihilation, SystemModel};

pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

/// How the system couples to the bath oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    /// `L = q / hbar`: `H_int = q sum (g* b^dagger + g b)`.
    Position,
    /// `L = a`: `H_int = hbar sum (g* a b^dagger + g a^dagger b)`.
    RotatingWave,
}

#[derive(Debug, Clone)]
pub struct FullModel {
    pub system: SystemModel,
    pub bath: DiscreteBath,
    pub bath_dims: Vec<usize>,
    pub coupling: CouplingKind,
    pub h_tot: CsrMatrix,
    pub total_dim: usize,
    /// Product of the bath dimensions; the system index is the major index.
    pub bath_dim: usize,
}

/// A total state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalState {
    pub amplitudes: CVector,
    pub t: f64,
}

pub fn build_full_model(system: &SystemModel, bath: &DiscreteBath, bath_dims: &[usize], coupling: CouplingKind) -> Result<FullModel> {
    build_full_model_capped(system, bath, bath_dims, coupling, DEFAULT_DIMENSION_CAP)
}

pub fn build_full_model_capped(
    system: &SystemModel,
    bath: &DiscreteBath,
    bath_dims: &[usize],
    coupling: CouplingKind,
    cap: usize,
) -> Result<FullModel> {
    if bath_dims.len() != bath.len() {
        return Err(Error::DimensionMismatch { expected: bath.len(), found: bath_dims.len() });
    }
    if bath_dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidParameter("every bath mode needs dimension >= 2".into()));
    }
    if bath.modes().iter().any(|m| m.nbar != 0.0) {
        return Err(Error::InvalidParameter("the oracle starts the bath in its vacuum; use zero-temperature modes".into()));
    }
    let requested = bath_dims.iter().try_fold(system.dim, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if requested > cap {
        return Err(Error::DimensionCap { requested, cap });
    }
    let l = match coupling {
        CouplingKind::Position => system.position_coupling()?,
        CouplingKind::RotatingWave => system.a.clone(),
    };
    let hbar = system.hbar;
    let bath_dim: usize = bath_dims.iter().product();
    let ns = system.dim;
    // Mixed-radix strides of the bath index, first mode most significant.
    let mut strides = vec![1usize; bath_dims.len()];
    for k in (0..bath_dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * bath_dims[k + 1];
    }
    let digit = |b: usize, k: usize| (b / strides[k]) % bath_dims[k];
    let nz = |z: &C64| z.re != 0.0 || z.im != 0.0;

    let mut trip = Vec::new();
    for i in 0..ns {
        for j in 0..ns {
            let hij = system.h[(i, j)];
            if nz(&hij) {
                for b in 0..bath_dim {
                    trip.push((i * bath_dim + b, j * bath_dim + b, hij));
                }
            }
        }
    }
    for b in 0..bath_dim {
        let e: f64 = bath.modes().iter().enumerate().map(|(k, m)| hbar * m.omega * digit(b, k) as f64).sum();
        if e != 0.0 {
            for s in 0..ns {
                trip.push((s * bath_dim + b, s * bath_dim + b, C64::from(e)));
            }
        }
    }
    let ld = l.adjoint();
    for (k, m) in bath.modes().iter().enumerate() {
        let bk = annihilation(bath_dims[k]);
        for b in 0..bath_dim {
            let n = digit(b, k);
            if n + 1 < bath_dims[k] {
                // <n+1| b^dagger |n> couples b -> b + stride.
                let up = b + strides[k];
                let amp = bk[(n, n + 1)];
                for i in 0..ns {
                    for j in 0..ns {
                        // hbar g* L (x) b^dagger
                        let v = C64::from(hbar) * m.g.conj() * l[(i, j)] * amp;
                        if nz(&v) {
                            trip.push((i * bath_dim + up, j * bath_dim + b, v));
                        }
                        // hbar g L^dagger (x) b
                        let w = C64::from(hbar) * m.g * ld[(i, j)] * amp;
                        if nz(&w) {
                            trip.push((i * bath_dim + b, j * bath_dim + up, w));
                        }
                    }
                }
            }
        }
    }
    let total_dim = ns * bath_dim;
    Ok(FullModel {
        system: system.clone(),
        bath: bath.clone(),
        bath_dims: bath_dims.to_vec(),
        coupling,
        h_tot: CsrMatrix::from_triplets(total_dim, total_dim, trip),
        total_dim,
        bath_dim,
    })
}

impl FullModel {
    /// `psi_S (x) |0, ..., 0>`.
    pub fn product_vacuum(&self, psi_s: &CVector) -> Result<CVector> {
        if psi_s.len() != self.system.dim {
            return Err(Error::DimensionMismatch { expected: self.system.dim, found: psi_s.len() });
        }
        let mut v = CVector::zeros(self.total_dim);
        for s in 0..self.system.dim {
            v[s * self.bath_dim] = psi_s[s];
        }
        Ok(v)
    }

    pub fn energy(&self, psi: &CVector) -> f64 {
        self.h_tot.expectation(psi.as_slice()).re
    }

    pub fn reduced_density(&self, psi: &CVector) -> CMatrix {
        reduced_density(psi, self.system.dim)
    }
}

/// Partial trace of `|psi><psi|` over everything but the leading `system_dim` index.
pub fn reduced_density(psi: &CVector, system_dim: usize) -> CMatrix {
    let bath_dim = psi.len() / system_dim;
    let v = psi.as_slice();
    let mut rho = CMatrix::zeros(system_dim, system_dim);
    for i in 0..system_dim {
        let ri = &v[i * bath_dim..(i + 1) * bath_dim];
        for j in i..system_dim {
            let rj = &v[j * bath_dim..(j + 1) * bath_dim];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in ri.iter().zip(rj) {
                acc += a * b.conj();
            }
            rho[(i, j)] = acc;
            rho[(j, i)] = acc.conj();
        }
    }
    symmetrize(&mut rho);
    rho
}

/// Exact propagator `exp(-i H_tot dt / hbar)` applied by a shifted Taylor series
/// on substeps short enough that the shifted operator has norm at most one.
#[derive(Debug)]
pub struct Propagator<'a> {
    model: &'a FullModel,
    shift: f64,
    substeps: usize,
    h: f64,
}

const TAYLOR_TOL: f64 = 1e-17;

impl<'a> Propagator<'a> {
    pub fn new(model: &'a FullModel, dt: f64) -> Self {
        let (lo, hi) = model.h_tot.gershgorin_interval();
        let shift = 0.5 * (lo + hi);
        let radius = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
        let substeps = ((radius * dt / model.system.hbar).ceil() as usize).max(1);
        Self { model, shift, substeps, h: dt / substeps as f64 }
    }

    pub fn step(&self, psi: &mut CVector, work: &mut [CVector; 2]) {
        let hbar = self.model.system.hbar;
        let scale = -I * self.h / hbar;
        let phase = C64::from_polar(1.0, -self.shift * self.h / hbar);
        for _ in 0..self.substeps {
            let [term, next] = work;
            term.copy_from(psi);
            let base = psi.norm();
            for k in 1..80 {
                self.model.h_tot.mul_to(term.as_slice(), next.as_mut_slice());
                let f = scale / k as f64;
                for (n, t) in next.iter_mut().zip(term.iter()) {
                    *n = f * (*n - self.shift * *t);
                }
                std::mem::swap(term, next);
                *psi += &*term;
                if term.norm() <= TAYLOR_TOL * base {
                    break;
                }
            }
            *psi *= phase;
        }
    }
}

/// Propagate and call `observe(i, t, psi)` at every `stride`-th grid point.
pub fn propagate_with<F>(model: &FullModel, psi0: &CVector, grid: &TimeGrid, stride: usize, mut observe: F) -> Result<()>
where
    F: FnMut(usize, f64, &CVector),
{
    if psi0.len() != model.total_dim {
        return Err(Error::DimensionMismatch { expected: model.total_dim, found: psi0.len() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("initial total state must have unit norm".into()));
    }
    let stride = stride.max(1);
    let prop = Propagator::new(model, grid.dt() * stride as f64);
    let mut psi = psi0.clone();
    let mut work = [CVector::zeros(model.total_dim), CVector::zeros(model.total_dim)];
    observe(0, 0.0, &psi);
    let mut i = 0;
    while i + stride <= grid.n_steps() {
        prop.step(&mut psi, &mut work);
        i += stride;
        observe(i, grid.t(i), &psi);
    }
    Ok(())
}

pub fn propagate_full(model: &FullModel, psi0: &CVector, grid: &TimeGrid, stride: usize) -> Result<Vec<TotalState>> {
    let mut out = Vec::new();
    propagate_with(model, psi0, grid, stride, |_, t, psi| out.push(TotalState { amplitudes: psi.clone(), t }))?;
    Ok(out)
}

/// Reduced densities of the oracle together with its conservation diagnostics.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub reduced: DensitySeries,
    /// Largest `| ||Psi|| - 1 |`.
    pub norm_drift: f64,
    /// Largest `|<H_tot>_t - <H_tot>_0| / |<H_tot>_0|`.
    pub energy_drift: f64,
}

/// Start from `psi_S (x)` vacuum and record reduced states without storing total states.
pub fn run_oracle(model: &FullModel, psi_s: &CVector, grid: &TimeGrid, stride: usize) -> Result<OracleRun> {
    let psi0 = model.product_vacuum(&(psi_s / C64::from(psi_s.norm())))?;
    let e0 = model.energy(&psi0);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let (mut norm_drift, mut energy_drift) = (0.0f64, 0.0f64);
    propagate_with(model, &psi0, grid, stride, |_, t, psi| {
        times.push(t);
        states.push(model.reduced_density(psi));
        norm_drift = norm_drift.max((psi.norm() - 1.0).abs());
        energy_drift = energy_drift.max((model.energy(psi) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
    })?;
    Ok(OracleRun { reduced: DensitySeries::new(times, states), norm_drift, energy_drift })
}

/// Largest trace distance between reduced states at `bath_dims` and at every mode dimension raised by one.
pub fn bath_truncation_defect(system: &SystemModel, bath: &DiscreteBath, bath_dims: &[usize], coupling: CouplingKind, psi_s: &CVector, grid: &TimeGrid, stride: usize) -> Result<f64> {
    let base = run_oracle(&build_full_model(system, bath, bath_dims, coupling)?, psi_s, grid, stride)?;
    let raised: Vec<usize> = bath_dims.iter().map(|d| d + 1).collect();
    let fine = run_oracle(&build_full_model(system, bath, &raised, coupling)?, psi_s, grid, stride)?;
    Ok(trace_distance(&base.reduced, &fine.reduced)?.into_iter().fold(0.0, f64::max))
}
