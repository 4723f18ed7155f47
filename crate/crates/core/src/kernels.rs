//! Spectral densities, bath correlation kernels and discretized baths.
//!
//! The kernel convention is `alpha(tau) = nu(tau) + i hbar eta(tau)` with
//!
//! ```text
//! nu(tau)  = hbar * int_0^inf J(w) coth(hbar w / 2 kT) cos(w tau) dw
//! eta(tau) = -int_0^inf J(w) sin(w tau) dw
//! ```
//!
//! and the classical damping kernel `gamma_cl(tau) = (2/M) int J(w) cos(w tau) / w dw`,
//! whose derivative is `(2/M) eta(tau)`.

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, Units};
use crate::linalg::{hermitian_eigenvalues, CMatrix, C64};
use crate::quadrature::{composite_gauss, gauss_legendre};

/// Relative convergence target of the frequency quadrature.
pub const EPS_QUAD: f64 = 1e-8;
/// Relative tolerance for negative eigenvalues of a sampled covariance.
pub const EPS_PSD: f64 = 1e-10;

const GAUSS_ORDER: usize = 16;
const MAX_REFINEMENTS: usize = 14;
/// Exponential cutoff: the integrand is dropped beyond this many cutoff frequencies.
const EXP_SUPPORT: f64 = 40.0;
/// Squared-Lorentzian cutoff: support truncated here (relative tail weight 2.5e-5).
const LORENTZ_SUPPORT: f64 = 200.0;

/// Shape of the spectral density.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralShape {
    /// `J = M gamma w exp(-w / Lambda)`.
    OhmicExponential,
    /// `J = M gamma w / (1 + (w / Lambda)^2)^2`, truncated at `200 Lambda`.
    OhmicLorentzian,
    /// Linear interpolation between samples, zero outside the sampled range.
    Tabulated { omega: Vec<f64>, value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    shape: SpectralShape,
    gamma: f64,
    cutoff: f64,
    mass: f64,
}

impl SpectralDensity {
    pub fn new(shape: SpectralShape, gamma: f64, cutoff: f64, mass: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if let SpectralShape::Tabulated { omega, value } = &shape {
            if omega.len() < 2 || omega.len() != value.len() {
                return Err(Error::InvalidParameter("tabulated density needs >= 2 matching samples".into()));
            }
            if omega[0] < 0.0 || omega.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter("tabulated frequencies must be increasing and >= 0".into()));
            }
            if value.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidParameter("tabulated density must be nonnegative".into()));
            }
        }
        Ok(Self { shape, gamma, cutoff, mass })
    }

    pub fn ohmic_exponential(gamma: f64, cutoff: f64, mass: f64) -> Result<Self> {
        Self::new(SpectralShape::OhmicExponential, gamma, cutoff, mass)
    }

    pub fn shape(&self) -> &SpectralShape {
        &self.shape
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `J(w)` for `w >= 0`.
    pub fn eval(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        let x = w / self.cutoff;
        match &self.shape {
            SpectralShape::OhmicExponential => self.mass * self.gamma * w * (-x).exp(),
            SpectralShape::OhmicLorentzian => {
                if x > LORENTZ_SUPPORT {
                    0.0
                } else {
                    self.mass * self.gamma * w / (1.0 + x * x).powi(2)
                }
            }
            SpectralShape::Tabulated { omega, value } => {
                let n = omega.len();
                if w < omega[0] || w > omega[n - 1] {
                    return 0.0;
                }
                let k = omega.partition_point(|&o| o <= w).clamp(1, n - 1);
                let (w0, w1) = (omega[k - 1], omega[k]);
                let u = (w - w0) / (w1 - w0);
                value[k - 1] * (1.0 - u) + value[k] * u
            }
        }
    }

    /// Breakpoints of the frequency integration (the support, split so the
    /// integrand is smooth within each interval).
    fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            SpectralShape::OhmicExponential => {
                (0..=EXP_SUPPORT as usize).map(|k| k as f64 * self.cutoff).collect()
            }
            SpectralShape::OhmicLorentzian => {
                (0..=LORENTZ_SUPPORT as usize).map(|k| k as f64 * self.cutoff).collect()
            }
            SpectralShape::Tabulated { omega, .. } => omega.clone(),
        }
    }

    fn zero_at_origin(&self) -> bool {
        match &self.shape {
            SpectralShape::Tabulated { omega, value } => omega[0] > 0.0 || value[0] == 0.0,
            _ => true,
        }
    }

    /// `int_0^inf J(w) dw` by converged quadrature.
    pub fn total_weight(&self) -> Result<f64> {
        self.integral_up_to(f64::INFINITY)
    }

    fn integral_up_to(&self, w_max: f64) -> Result<f64> {
        let all = self.breakpoints();
        let last = all[all.len() - 1];
        let mut breaks: Vec<f64> = all.into_iter().filter(|&b| b < w_max).collect();
        breaks.push(w_max.min(last));
        breaks.dedup();
        if breaks.len() < 2 {
            return Ok(0.0);
        }
        let mut previous = f64::NAN;
        for level in 0..MAX_REFINEMENTS {
            let (x, w) = composite_gauss(&breaks, 1 << level, GAUSS_ORDER);
            let v: f64 = x.iter().zip(&w).map(|(&x, &w)| w * self.eval(x)).sum();
            if (v - previous).abs() <= EPS_QUAD * v.abs().max(f64::MIN_POSITIVE) {
                return Ok(v);
            }
            previous = v;
        }
        Err(Error::QuadratureNotConverged { last: previous, previous })
    }
}

/// `coth(x)` for `x > 0`, stable for small and large arguments.
fn coth(x: f64) -> f64 {
    if x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

/// Bath correlation kernel tabulated for `tau = k dt`, `k = 0..=n`; negative
/// lags are obtained by Hermitian mirroring, so `alpha(-tau) = alpha(tau)^*` exactly.
#[derive(Debug, Clone)]
pub struct BathKernel {
    grid: TimeGrid,
    hbar: f64,
    temperature: f64,
    alpha: Vec<C64>,
    eta_dot: Vec<f64>,
    gamma_cl: Option<Vec<f64>>,
}

impl BathKernel {
    fn from_parts(
        grid: TimeGrid,
        hbar: f64,
        temperature: f64,
        mut alpha: Vec<C64>,
        eta_dot: Vec<f64>,
        gamma_cl: Option<Vec<f64>>,
    ) -> Self {
        // Hermiticity forces a real value at zero lag.
        alpha[0].im = 0.0;
        Self { grid, hbar, temperature, alpha, eta_dot, gamma_cl }
    }

    /// A kernel given in closed form. `d eta / d tau` is taken by central differences.
    pub fn from_fn(grid: TimeGrid, hbar: f64, f: impl Fn(f64) -> C64) -> Self {
        let alpha: Vec<C64> = grid.times().map(f).collect();
        let eta_dot = finite_difference_eta_dot(&alpha, grid.dt(), hbar);
        Self::from_parts(grid, hbar, 0.0, alpha, eta_dot, None)
    }

    /// `alpha(tau) = (gamma kappa / 2) exp(-kappa |tau| - i w0 tau)`, the
    /// Lorentzian-spectrum kernel that tends to `gamma delta(tau)` for large `kappa`.
    pub fn exponential(grid: TimeGrid, hbar: f64, gamma: f64, kappa: f64, w0: f64) -> Self {
        let mut k = Self::from_fn(grid, hbar, |t| {
            C64::from_polar(0.5 * gamma * kappa * (-kappa * t).exp(), -w0 * t)
        });
        k.eta_dot = grid
            .times()
            .map(|t| {
                // eta = Im(alpha) / hbar, differentiate analytically.
                let a = 0.5 * gamma * kappa * (-kappa * t).exp();
                a * (kappa * (w0 * t).sin() - w0 * (w0 * t).cos()) / hbar
            })
            .collect();
        k
    }

    /// The identically vanishing kernel.
    pub fn zero(grid: TimeGrid, hbar: f64) -> Self {
        let n = grid.len();
        Self::from_parts(grid, hbar, 0.0, vec![C64::new(0.0, 0.0); n], vec![0.0; n], Some(vec![0.0; n]))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Tabulated nonnegative half, `alpha(k dt)`.
    pub fn alpha_table(&self) -> &[C64] {
        &self.alpha
    }

    /// `alpha(k dt)` for any integer lag `|k| <= n_steps`.
    #[inline]
    pub fn alpha(&self, k: isize) -> C64 {
        if k >= 0 {
            self.alpha[k as usize]
        } else {
            self.alpha[(-k) as usize].conj()
        }
    }

    #[inline]
    pub fn nu(&self, k: isize) -> f64 {
        self.alpha[k.unsigned_abs()].re
    }

    #[inline]
    pub fn eta(&self, k: isize) -> f64 {
        let v = self.alpha[k.unsigned_abs()].im / self.hbar;
        if k >= 0 {
            v
        } else {
            -v
        }
    }

    /// `d eta / d tau` at lag `k dt` (an even function).
    #[inline]
    pub fn eta_dot(&self, k: isize) -> f64 {
        self.eta_dot[k.unsigned_abs()]
    }

    /// Classical damping kernel, when the mass is known.
    pub fn gamma_cl(&self, k: isize) -> Option<f64> {
        self.gamma_cl.as_ref().map(|g| g[k.unsigned_abs()])
    }

    pub fn has_gamma_cl(&self) -> bool {
        self.gamma_cl.is_some()
    }

    /// A copy with `alpha -> lambda alpha`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid,
            hbar: self.hbar,
            temperature: self.temperature,
            alpha: self.alpha.iter().map(|a| a * lambda).collect(),
            eta_dot: self.eta_dot.iter().map(|a| a * lambda).collect(),
            gamma_cl: self.gamma_cl.as_ref().map(|g| g.iter().map(|v| v * lambda).collect()),
        }
    }

    /// Restrict to the first `n_steps` lags.
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        let grid = self.grid.truncated(n_steps)?;
        let n = grid.len();
        Ok(Self {
            grid,
            hbar: self.hbar,
            temperature: self.temperature,
            alpha: self.alpha[..n].to_vec(),
            eta_dot: self.eta_dot[..n].to_vec(),
            gamma_cl: self.gamma_cl.as_ref().map(|g| g[..n].to_vec()),
        })
    }

    /// `C_ij = alpha(t_i - t_j)` over the first `n_points` grid points.
    pub fn covariance_matrix(&self, n_points: usize) -> CMatrix {
        CMatrix::from_fn(n_points, n_points, |i, j| self.alpha(i as isize - j as isize))
    }

    /// Smallest and largest eigenvalue of the full grid covariance.
    pub fn covariance_spectrum(&self) -> (f64, f64) {
        let ev = hermitian_eigenvalues(&self.covariance_matrix(self.grid.len()));
        (ev[0], ev[ev.len() - 1])
    }
}

fn finite_difference_eta_dot(alpha: &[C64], dt: f64, hbar: f64) -> Vec<f64> {
    let n = alpha.len();
    let eta = |k: isize| -> f64 {
        let v = alpha[k.unsigned_abs()].im / hbar;
        if k >= 0 {
            v
        } else {
            -v
        }
    };
    (0..n)
        .map(|k| {
            let k = k as isize;
            if (k as usize) + 1 < n {
                (eta(k + 1) - eta(k - 1)) / (2.0 * dt)
            } else {
                (3.0 * eta(k) - 4.0 * eta(k - 1) + eta(k - 2)) / (2.0 * dt)
            }
        })
        .collect()
}

/// Frequency-integrated tables on the lags `k dt`.
struct FrequencyTables {
    nu: Vec<f64>,
    eta: Vec<f64>,
    eta_dot: Vec<f64>,
    damping: Option<Vec<f64>>,
}

/// Evaluate the four frequency integrals on the lag grid for given nodes.
fn integrate_tables(
    j: &SpectralDensity,
    thermal: impl Fn(f64) -> f64,
    nodes: &[f64],
    weights: &[f64],
    grid: &TimeGrid,
    with_damping: bool,
) -> FrequencyTables {
    let n = grid.len();
    let dt = grid.dt();
    let mut nu = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut eta_dot = vec![0.0; n];
    let mut damping = if with_damping { Some(vec![0.0; n]) } else { None };
    for (&w, &wt) in nodes.iter().zip(weights) {
        let jw = j.eval(w) * wt;
        if jw == 0.0 {
            continue;
        }
        let th = thermal(w);
        let step = C64::from_polar(1.0, w * dt);
        let mut phase = C64::new(1.0, 0.0);
        for k in 0..n {
            if k % 64 == 0 {
                phase = C64::from_polar(1.0, w * dt * k as f64);
            }
            let (cos, sin) = (phase.re, phase.im);
            nu[k] += jw * th * cos;
            eta[k] -= jw * sin;
            eta_dot[k] -= jw * w * cos;
            if let Some(d) = damping.as_mut() {
                d[k] += jw * cos / w;
            }
            phase *= step;
        }
    }
    FrequencyTables { nu, eta, eta_dot, damping }
}

fn max_relative_change(new: &[f64], old: &[f64]) -> (f64, f64, f64) {
    let scale = new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = (0.0, 0.0, 0.0);
    for (a, b) in new.iter().zip(old) {
        let d = (a - b).abs();
        if d > worst.0 {
            worst = (d, *a, *b);
        }
    }
    if scale == 0.0 {
        (0.0, worst.1, worst.2)
    } else {
        (worst.0 / scale, worst.1, worst.2)
    }
}

/// Tabulate the finite-temperature kernel of `J` on the lags of `grid`.
///
/// At `T = 0` the thermal factor is exactly one.
pub fn make_kernel(j: &SpectralDensity, temperature: f64, grid: &TimeGrid, units: Units) -> Result<BathKernel> {
    if !(temperature >= 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be nonnegative, got {temperature}")));
    }
    if j.gamma() == 0.0 {
        return Ok(BathKernel { temperature, ..BathKernel::zero(*grid, units.hbar) });
    }
    let origin_ok = j.zero_at_origin();
    if temperature > 0.0 && !origin_ok {
        return Err(Error::DivergentIntegral("J(0) != 0 makes the thermal noise kernel diverge".into()));
    }
    let beta_half = if temperature > 0.0 { units.hbar / (2.0 * units.k_b * temperature) } else { f64::INFINITY };
    let thermal = |w: f64| if temperature > 0.0 { coth(beta_half * w) } else { 1.0 };
    let breaks = j.breakpoints();
    let mut previous: Option<FrequencyTables> = None;
    for level in 0..MAX_REFINEMENTS {
        let (x, w) = composite_gauss(&breaks, 1 << level, GAUSS_ORDER);
        let tables = integrate_tables(j, thermal, &x, &w, grid, origin_ok);
        if let Some(prev) = &previous {
            let checks = [
                max_relative_change(&tables.nu, &prev.nu),
                max_relative_change(&tables.eta, &prev.eta),
                max_relative_change(&tables.eta_dot, &prev.eta_dot),
            ];
            let converged = checks.iter().all(|c| c.0 <= EPS_QUAD);
            if converged {
                return Ok(finish_kernel(tables, j.mass(), temperature, grid, units.hbar));
            }
            if level + 1 == MAX_REFINEMENTS {
                let worst = checks.iter().fold(checks[0], |a, b| if b.0 > a.0 { *b } else { a });
                return Err(Error::QuadratureNotConverged { last: worst.1, previous: worst.2 });
            }
        }
        previous = Some(tables);
    }
    unreachable!("refinement loop returns")
}

fn finish_kernel(t: FrequencyTables, mass: f64, temperature: f64, grid: &TimeGrid, hbar: f64) -> BathKernel {
    let alpha = t.nu.iter().zip(&t.eta).map(|(&nu, &eta)| C64::new(hbar * nu, hbar * eta)).collect();
    let gamma_cl = t.damping.map(|d| d.into_iter().map(|v| 2.0 * v / mass).collect());
    BathKernel::from_parts(*grid, hbar, temperature, alpha, t.eta_dot, gamma_cl)
}

/// `gamma_cl(k dt) = (2/M) int J(w) cos(w k dt) / w dw`.
pub fn classical_damping_kernel(j: &SpectralDensity, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !j.zero_at_origin() {
        return Err(Error::DivergentIntegral("J(0) != 0: the 1/w damping integral diverges".into()));
    }
    let kernel = make_kernel(j, 0.0, grid, Units::default())?;
    Ok(kernel.gamma_cl.unwrap_or_else(|| vec![0.0; grid.len()]))
}

/// One bath oscillator: coupling, frequency and thermal occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub g: C64,
    pub omega: f64,
    pub nbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscretizationScheme {
    UniformMidpoint,
    GaussLegendre,
}

/// Finite list of bath modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    modes: Vec<BathMode>,
    mass: Option<f64>,
    /// `sum |g|^2 / (hbar int_0^inf J)`, when built from a spectral density.
    pub captured_fraction: Option<f64>,
    /// Set when `int_0^{w_max} J < 0.99 int_0^inf J`.
    pub coverage_warning: bool,
}

/// Bose occupation `1 / (exp(hbar w / kT) - 1)`; zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64, units: Units) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (units.hbar * omega / (units.k_b * temperature)).exp_m1()
    }
}

impl DiscreteBath {
    /// Explicit modes. Frequencies must be positive and occupations nonnegative.
    pub fn from_modes(modes: Vec<BathMode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("bath needs at least one mode".into()));
        }
        if modes.iter().any(|m| !(m.omega > 0.0) || !(m.nbar >= 0.0)) {
            return Err(Error::InvalidParameter("mode frequencies must be > 0 and occupations >= 0".into()));
        }
        Ok(Self { modes, mass: None, captured_fraction: None, coverage_warning: false })
    }

    /// Zero-temperature modes with real couplings.
    pub fn zero_temperature(couplings: &[(f64, f64)]) -> Result<Self> {
        Self::from_modes(couplings.iter().map(|&(g, omega)| BathMode { g: C64::new(g, 0.0), omega, nbar: 0.0 }).collect())
    }

    /// Attach the system mass so the damping kernel can be formed.
    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mass(&self) -> Option<f64> {
        self.mass
    }

    pub fn total_coupling(&self) -> f64 {
        self.modes.iter().map(|m| m.g.norm_sqr()).sum()
    }
}

/// Discretize `J` into `n_modes` oscillators on `(0, w_max]` with `|g|^2 = hbar J(w_k) w_k`.
pub fn discretize_bath(
    j: &SpectralDensity,
    temperature: f64,
    units: Units,
    n_modes: usize,
    omega_max: f64,
    scheme: DiscretizationScheme,
) -> Result<DiscreteBath> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be >= 1".into()));
    }
    if !(omega_max > 0.0) {
        return Err(Error::InvalidParameter(format!("omega_max must be positive, got {omega_max}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be nonnegative, got {temperature}")));
    }
    let (nodes, weights) = match scheme {
        DiscretizationScheme::UniformMidpoint => {
            let h = omega_max / n_modes as f64;
            ((0..n_modes).map(|k| (k as f64 + 0.5) * h).collect::<Vec<_>>(), vec![h; n_modes])
        }
        DiscretizationScheme::GaussLegendre => {
            let (x, w) = gauss_legendre(n_modes);
            (
                x.iter().map(|x| 0.5 * omega_max * (x + 1.0)).collect(),
                w.iter().map(|w| 0.5 * omega_max * w).collect(),
            )
        }
    };
    let modes: Vec<BathMode> = nodes
        .iter()
        .zip(&weights)
        .map(|(&omega, &w)| BathMode {
            g: C64::new((units.hbar * j.eval(omega) * w).sqrt(), 0.0),
            omega,
            nbar: bose_occupation(omega, temperature, units),
        })
        .collect();
    let total = j.total_weight()?;
    let (captured_fraction, coverage_warning) = if total > 0.0 {
        let inside = j.integral_up_to(omega_max)?;
        let sum: f64 = modes.iter().map(|m| m.g.norm_sqr()).sum();
        (Some(sum / (units.hbar * total)), inside < 0.99 * total)
    } else {
        (None, false)
    };
    Ok(DiscreteBath { modes, mass: Some(j.mass()), captured_fraction, coverage_warning })
}

/// `alpha(tau) = sum |g|^2 [(n + 1) exp(-i w tau) + n exp(i w tau)]`.
pub fn kernel_from_bath(bath: &DiscreteBath, grid: &TimeGrid, hbar: f64) -> BathKernel {
    let n = grid.len();
    let mut alpha = vec![C64::new(0.0, 0.0); n];
    let mut eta_dot = vec![0.0; n];
    let mut damping = vec![0.0; n];
    for m in bath.modes() {
        let g2 = m.g.norm_sqr();
        for (k, t) in grid.times().enumerate() {
            let (s, c) = (m.omega * t).sin_cos();
            alpha[k] += C64::new(g2 * (2.0 * m.nbar + 1.0) * c, -g2 * s);
            eta_dot[k] -= g2 * m.omega * c / hbar;
            damping[k] += g2 * c / (hbar * m.omega);
        }
    }
    let gamma_cl = bath.mass().map(|mass| damping.iter().map(|d| 2.0 * d / mass).collect());
    BathKernel::from_parts(*grid, hbar, f64::NAN, alpha, eta_dot, gamma_cl)
}

/// Closed form of the zero-temperature Ohmic-exponential kernel,
/// `hbar M gamma Lambda^2 / (1 + i Lambda tau)^2`.
pub fn ohmic_exponential_zero_t(hbar: f64, mass: f64, gamma: f64, cutoff: f64, tau: f64) -> C64 {
    let d = C64::new(1.0, cutoff * tau);
    C64::from(hbar * mass * gamma * cutoff * cutoff) / (d * d)
}
