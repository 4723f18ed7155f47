use crate::error::{Error, Result};
use crate::grid::{Series, TimeGrid};
use crate::kernels::BathKernel;
use crate::linalg::{C64, I};

/// `|f|` or `|g|` above this aborts the evolution.
pub const INSTABILITY_BOUND: f64 = 1e12;

/// Tables of the O-operator ansatz `O(t,s) = f q + g p / (M Omega) + i int j z* ds'`
/// (up to the normalization fixed by the integrated functions) on the triangular grid.
///
/// Row `i` of `f`, `g` and `j_int` holds the values at `t_i` for `s_j`, `j <= i`.
#[derive(Debug, Clone)]
pub struct QbmSseCoeffs {
    grid: TimeGrid,
    pub omega: f64,
    pub mass: f64,
    pub hbar: f64,
    pub f: Vec<Vec<C64>>,
    pub g: Vec<Vec<C64>>,
    pub big_f: Vec<C64>,
    pub big_g: Vec<C64>,
    pub j_int: Vec<Vec<C64>>,
    /// `j(t_max, s, s')`, row-major over `(s, s')`.
    pub j_final: Vec<C64>,
}

impl QbmSseCoeffs {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn f_series(&self) -> Series<C64> {
        Series::new(self.grid, self.big_f.clone()).expect("lengths match")
    }

    pub fn g_series(&self) -> Series<C64> {
        Series::new(self.grid, self.big_g.clone()).expect("lengths match")
    }

    /// `j(t_max, s_a, s_b)`.
    pub fn j_final_at(&self, a: usize, b: usize) -> C64 {
        self.j_final[a * self.grid.len() + b]
    }
}

struct Workspace<'a> {
    alpha: &'a [C64],
    dt: f64,
    pref: f64,
    stride: usize,
}

impl Workspace<'_> {
    fn weight(&self, j: usize, i: usize) -> f64 {
        if j == 0 || j == i {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// `(F, G, J(., s'_k))` at `t_i` from rows `f`, `g` and the `j` table.
    fn integrals(&self, i: usize, f: &[C64], g: &[C64], j: &[C64], out_j: &mut Vec<C64>) -> (C64, C64) {
        out_j.clear();
        out_j.resize(i + 1, C64::new(0.0, 0.0));
        if i == 0 {
            return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        let mut big_f = C64::new(0.0, 0.0);
        let mut big_g = C64::new(0.0, 0.0);
        for s in 0..=i {
            let a = self.alpha[i - s] * (self.weight(s, i) * self.pref);
            big_f += a * f[s];
            big_g += a * g[s];
            let row = &j[s * self.stride..s * self.stride + i + 1];
            for (o, v) in out_j.iter_mut().zip(row) {
                *o += a * v;
            }
        }
        (big_f, big_g)
    }
}

/// Advance `f`, `g`, `j` in `t` with Heun steps, appending the boundary row
/// `f(t,t) = 1`, `g(t,t) = 0`, `j(t,t,.) = 0` and column `j(t,s,t) = -g(t,s)` at each new time.
pub fn evolve_sse_coeffs(kernel: &BathKernel, omega: f64, mass: f64, grid: &TimeGrid) -> Result<QbmSseCoeffs> {
    let kg = kernel.grid();
    if (kg.dt() - grid.dt()).abs() > 1e-12 * grid.dt() || kg.n_steps() < grid.n_steps() {
        return Err(Error::InvalidParameter("kernel grid does not cover the coefficient grid".into()));
    }
    if !(omega > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidParameter("omega and mass must be positive".into()));
    }
    let hbar = kernel.hbar();
    let n = grid.len();
    let dt = grid.dt();
    let ws = Workspace { alpha: &kernel.alpha_table()[..n], dt, pref: 1.0 / (mass * omega * hbar), stride: n };

    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut f_rows: Vec<Vec<C64>> = vec![vec![one]];
    let mut g_rows: Vec<Vec<C64>> = vec![vec![zero]];
    let mut big_f = vec![zero];
    let mut big_g = vec![zero];
    let mut j_rows: Vec<Vec<C64>> = vec![vec![zero]];
    let mut j = vec![zero; n * n];
    let mut j_pred = vec![zero; n * n];
    let mut j_tmp = Vec::with_capacity(n);

    let mut df0 = Vec::with_capacity(n);
    let mut dg0 = Vec::with_capacity(n);
    let mut df1 = Vec::with_capacity(n);
    let mut dg1 = Vec::with_capacity(n);

    let derivs = |f: &[C64], g: &[C64], bf: C64, bg: C64, jr: &[C64], df: &mut Vec<C64>, dg: &mut Vec<C64>| {
        df.clear();
        dg.clear();
        for s in 0..f.len() {
            df.push(g[s] * omega - I * 2.0 * g[s] * bf + I * f[s] * bg + I * jr[s]);
            dg.push(-f[s] * omega - I * g[s] * bg);
        }
    };

    for i in 0..n - 1 {
        let (f, g) = (&f_rows[i], &g_rows[i]);
        let jr = &j_rows[i];
        derivs(f, g, big_f[i], big_g[i], jr, &mut df0, &mut dg0);

        // Predictor, then the boundary row and column at t_{i+1}.
        let mut fp: Vec<C64> = f.iter().zip(&df0).map(|(v, d)| v + d * dt).collect();
        let mut gp: Vec<C64> = g.iter().zip(&dg0).map(|(v, d)| v + d * dt).collect();
        fp.push(one);
        gp.push(zero);
        for s in 0..=i {
            let gs = g[s] * (-I * dt);
            for k in 0..=i {
                j_pred[s * n + k] = j[s * n + k] + gs * jr[k];
            }
            j_pred[s * n + i + 1] = -gp[s];
        }
        for k in 0..=i + 1 {
            j_pred[(i + 1) * n + k] = zero;
        }
        let (fp_int, gp_int) = ws.integrals(i + 1, &fp, &gp, &j_pred, &mut j_tmp);
        derivs(&fp[..=i], &gp[..=i], fp_int, gp_int, &j_tmp, &mut df1, &mut dg1);

        // Corrector.
        let mut fc: Vec<C64> = (0..=i).map(|s| f[s] + (df0[s] + df1[s]) * (0.5 * dt)).collect();
        let mut gc: Vec<C64> = (0..=i).map(|s| g[s] + (dg0[s] + dg1[s]) * (0.5 * dt)).collect();
        fc.push(one);
        gc.push(zero);
        for s in 0..=i {
            let g0 = g[s] * (-I * 0.5 * dt);
            let g1 = gp[s] * (-I * 0.5 * dt);
            for k in 0..=i {
                j[s * n + k] += g0 * jr[k] + g1 * j_tmp[k];
            }
            j[s * n + i + 1] = -gc[s];
        }
        for k in 0..=i + 1 {
            j[(i + 1) * n + k] = zero;
        }
        if let Some(bad) = fc.iter().chain(&gc).find(|v| !(v.norm() <= INSTABILITY_BOUND)) {
            return Err(Error::Instability { t: grid.t(i + 1), magnitude: bad.norm() });
        }
        let mut row = Vec::with_capacity(i + 2);
        let (bf, bg) = ws.integrals(i + 1, &fc, &gc, &j, &mut row);
        big_f.push(bf);
        big_g.push(bg);
        j_rows.push(row);
        f_rows.push(fc);
        g_rows.push(gc);
    }
    Ok(QbmSseCoeffs {
        grid: *grid,
        omega,
        mass,
        hbar,
        f: f_rows,
        g: g_rows,
        big_f,
        big_g,
        j_int: j_rows,
        j_final: j,
    })
}
