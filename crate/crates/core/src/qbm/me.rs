use crate::error::{Error, Result};
use crate::grid::{Series, TimeGrid};
use crate::kernels::BathKernel;
use crate::linalg::C64;
use crate::memory::{ClassicalSolution, EPS_DIV};
use crate::quadrature::QuadratureRule;

/// `w, x, y, z` at a fixed `t_i` as functions of `s_j`, `j <= i`.
/// `w` and `x` are real; `y = y_R + i y_I`, `z = z_R + i z_I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wxyz {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<C64>,
    pub z: Vec<C64>,
}

/// The `R(t,s)` decomposition obtained by inverting `w = k + m`, `x = l + n`,
/// `y = k - m`, `z = n - l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Klmn {
    pub k: Vec<C64>,
    pub l: Vec<C64>,
    pub m: Vec<C64>,
    pub n: Vec<C64>,
}

pub fn klmn_tables(w: &[f64], x: &[f64], y: &[C64], z: &[C64]) -> Result<Klmn> {
    let len = w.len();
    for other in [x.len(), y.len(), z.len()] {
        if other != len {
            return Err(Error::DimensionMismatch { expected: len, found: other });
        }
    }
    let half = |a: C64| a * 0.5;
    Ok(Klmn {
        k: (0..len).map(|j| half(y[j] + w[j])).collect(),
        m: (0..len).map(|j| half(C64::from(w[j]) - y[j])).collect(),
        l: (0..len).map(|j| half(C64::from(x[j]) - z[j])).collect(),
        n: (0..len).map(|j| half(z[j] + x[j])).collect(),
    })
}

fn check_denominator(classical: &ClassicalSolution, i: usize) -> Result<f64> {
    let d = classical.denominator(i);
    if !(d.abs() >= EPS_DIV * classical.omega * classical.omega) {
        return Err(Error::SingularNormalization { t: classical.grid().t(i), value: d });
    }
    Ok(d)
}

/// Drift coefficients from the classical solution alone:
/// `a = -M Omega^2 + M (q''^2 - q' q''') / D`, `b = (q q''' - q' q'') / D`.
pub fn drift_closed_form(classical: &ClassicalSolution, i: usize) -> Result<(f64, f64)> {
    let d = check_denominator(classical, i)?;
    let (q, v, acc, jerk) = (classical.q[i], classical.q_dot[i], classical.q_ddot[i], classical.q_dddot[i]);
    let m = classical.mass;
    let w2 = classical.omega * classical.omega;
    Ok((-m * w2 + m * (acc * acc - v * jerk) / d, (q * jerk - v * acc) / d))
}

/// Closed forms of `w, x, y, z` at `t_i` with the imaginary parts of `y`, `z`
/// built from the noise kernel by double integrals plus the homogeneous
/// correction that enforces the final values at `s = t`.
pub fn wxyz_closed_form(
    classical: &ClassicalSolution,
    kernel: &BathKernel,
    i: usize,
    rule: QuadratureRule,
) -> Result<Wxyz> {
    wxyz_impl(classical, kernel, i, rule, true)
}

fn wxyz_impl(classical: &ClassicalSolution, kernel: &BathKernel, i: usize, rule: QuadratureRule, imaginary: bool) -> Result<Wxyz> {
    let d = check_denominator(classical, i)?;
    let (q, v) = (&classical.q, &classical.q_dot);
    let omega = classical.omega;
    let mass = classical.mass;
    let hbar = kernel.hbar();
    let dt = classical.grid().dt();

    let w: Vec<f64> = (0..=i).map(|j| (v[j] * v[i] - q[j] * classical.q_ddot[i]) / d).collect();
    let x: Vec<f64> = (0..=i).map(|j| omega * (q[j] * v[i] - v[j] * q[i]) / d).collect();

    let mut y_im = vec![0.0; i + 1];
    let mut z_im = vec![0.0; i + 1];
    if i > 0 && imaginary {
        let outer = rule.weights(i, dt);
        // V(s') = int_0^t nu(s' - s'') h(t - s'') ds''.
        let mut vy = vec![0.0; i + 1];
        let mut vz = vec![0.0; i + 1];
        for (m, (vym, vzm)) in vy.iter_mut().zip(vz.iter_mut()).enumerate() {
            for l in 0..=i {
                let nu = outer[l] * kernel.nu(m as isize - l as isize);
                *vym += nu * v[i - l];
                *vzm += nu * q[i - l];
            }
        }
        // P(s) = pref int_0^s q(s - s') V(s') ds' and its derivative at s = t.
        let cy = 2.0 / (mass * omega * omega * hbar);
        let cz = 2.0 / (mass * omega * hbar);
        let mut py = vec![0.0; i + 1];
        let mut pz = vec![0.0; i + 1];
        for j in 1..=i {
            let inner = rule.weights(j, dt);
            let (mut sy, mut sz) = (0.0, 0.0);
            for mm in 0..j {
                sy += inner[mm] * q[j - mm] * vy[mm];
                sz += inner[mm] * q[j - mm] * vz[mm];
            }
            py[j] = cy * sy;
            pz[j] = cz * sz;
        }
        let (mut dy, mut dz) = (0.0, 0.0);
        for mm in 0..=i {
            dy += outer[mm] * v[i - mm] * vy[mm];
            dz += outer[mm] * v[i - mm] * vz[mm];
        }
        let (dy, dz) = (cy * dy, cz * dz);
        for j in 0..=i {
            y_im[j] = py[j] - py[i] * w[j] - dy * x[j] / omega;
            z_im[j] = pz[j] - pz[i] * w[j] - dz * x[j] / omega;
        }
    }
    let y = (0..=i).map(|j| C64::new(v[i - j] / omega, y_im[j])).collect();
    let z = (0..=i).map(|j| C64::new(q[i - j], z_im[j])).collect();
    Ok(Wxyz { w, x, y, z })
}

/// Exact master-equation coefficients and the tables they are built from.
#[derive(Debug, Clone)]
pub struct QbmMeCoeffs {
    grid: TimeGrid,
    pub classical: ClassicalSolution,
    pub hbar: f64,
    /// Row `i` holds `w(t_i, s_j)` for `j <= i`; likewise for the others.
    pub w: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<C64>>,
    pub z: Vec<Vec<C64>>,
    pub a_t: Vec<f64>,
    pub b_t: Vec<f64>,
    pub c_pq: Vec<f64>,
    pub d_qq: Vec<f64>,
}

impl QbmMeCoeffs {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn omega(&self) -> f64 {
        self.classical.omega
    }

    pub fn mass(&self) -> f64 {
        self.classical.mass
    }

    pub fn klmn(&self, i: usize) -> Klmn {
        klmn_tables(&self.w[i], &self.x[i], &self.y[i], &self.z[i]).expect("rows share a length")
    }

    pub fn series(&self) -> [Series<f64>; 4] {
        [&self.a_t, &self.b_t, &self.c_pq, &self.d_qq].map(|v| Series::new(self.grid, v.clone()).expect("lengths match"))
    }
}

/// Quadrature and scope of the coefficient construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeOptions {
    /// Rule for the `s` integrals; the default matches the classical solver.
    pub rule: QuadratureRule,
    /// When false only the drift pair `a, b` is built (`c`, `d` are left `NaN`
    /// and the imaginary parts of `y`, `z` at zero), skipping the `O(N^3)` double integrals.
    pub diffusion: bool,
}

impl Default for MeOptions {
    fn default() -> Self {
        Self { rule: QuadratureRule::SimpsonComposite, diffusion: true }
    }
}

pub fn me_coefficients(kernel: &BathKernel, classical: &ClassicalSolution) -> Result<QbmMeCoeffs> {
    me_coefficients_with(kernel, classical, MeOptions::default())
}

/// `a = 2 int eta w`, `b = (2 / M Omega) int eta x`,
/// `c = (1 / M Omega) int (nu z_R - hbar eta z_I)`, `d = int (nu y_R - hbar eta y_I)`,
/// all kernels evaluated at `t - s`.
pub fn me_coefficients_with(kernel: &BathKernel, classical: &ClassicalSolution, options: MeOptions) -> Result<QbmMeCoeffs> {
    let rule = options.rule;
    let grid = *classical.grid();
    let kg = kernel.grid();
    if (kg.dt() - grid.dt()).abs() > 1e-12 * grid.dt() || kg.n_steps() < grid.n_steps() {
        return Err(Error::InvalidParameter("kernel grid does not cover the classical solution".into()));
    }
    let hbar = kernel.hbar();
    let mw = classical.mass * classical.omega;
    let n = grid.len();
    let mut out = QbmMeCoeffs {
        grid,
        classical: classical.clone(),
        hbar,
        w: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        a_t: vec![0.0; n],
        b_t: vec![0.0; n],
        c_pq: vec![0.0; n],
        d_qq: vec![0.0; n],
    };
    for i in 0..n {
        let t = wxyz_impl(classical, kernel, i, rule, options.diffusion)?;
        if i > 0 {
            let wts = rule.weights(i, grid.dt());
            let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..=i {
                let lag = (i - j) as isize;
                let (eta, nu) = (kernel.eta(lag) * wts[j], kernel.nu(lag) * wts[j]);
                a += eta * t.w[j];
                b += eta * t.x[j];
                c += nu * t.z[j].re - hbar * eta * t.z[j].im;
                d += nu * t.y[j].re - hbar * eta * t.y[j].im;
            }
            out.a_t[i] = 2.0 * a;
            out.b_t[i] = 2.0 * b / mw;
            if options.diffusion {
                out.c_pq[i] = c / mw;
                out.d_qq[i] = d;
            } else {
                out.c_pq[i] = f64::NAN;
                out.d_qq[i] = f64::NAN;
            }
        }
        out.w.push(t.w);
        out.x.push(t.x);
        out.y.push(t.y);
        out.z.push(t.z);
    }
    Ok(out)
}
