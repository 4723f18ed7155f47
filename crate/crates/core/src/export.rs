//! Plain CSV tables with a `#`-prefixed metadata header.
//!
//! Floats are written with 17 significant digits so a table read back
//! reproduces the values bit for bit.

use std::io::{BufRead, Write};

use crate::approx::ApproxObar;
use crate::error::{Error, Result};
use crate::kernels::BathKernel;
use crate::linalg::{CMatrix, C64};
use crate::master::{DensitySeries, ObservableRow};
use crate::memory::{AmplitudeResponse, ClassicalSolution};
use crate::noise::NoisePath;
use crate::qbm::{QbmMeCoeffs, QbmSseCoeffs};
use crate::trajectories::TrackedObservable;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Write `# key: value` lines, then the header and rows.
    pub fn write<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|&v| format_float(v)))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a table written by [`Table::write`], returning its metadata as well.
    pub fn read<R: BufRead>(r: R) -> Result<(Self, Vec<(String, String)>)> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            match line.strip_prefix('#') {
                Some(rest) => {
                    let (k, v) = rest.trim().split_once(':').unwrap_or((rest.trim(), ""));
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut table = Table { columns, rows: Vec::new() };
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Io(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != table.columns.len() {
                return Err(Error::DimensionMismatch { expected: table.columns.len(), found: row.len() });
            }
            table.rows.push(row);
        }
        Ok((table, meta))
    }
}

pub fn kernel_table(kernel: &BathKernel) -> Table {
    let mut t = Table::new(["t", "alpha_re", "alpha_im", "nu", "eta", "eta_dot", "gamma_cl"]);
    for (i, tau) in kernel.grid().times().enumerate() {
        let k = i as isize;
        let a = kernel.alpha(k);
        t.push(vec![tau, a.re, a.im, kernel.nu(k), kernel.eta(k), kernel.eta_dot(k), kernel.gamma_cl(k).unwrap_or(f64::NAN)]);
    }
    t
}

pub fn noise_path_table(path: &NoisePath) -> Table {
    let mut t = Table::new(["t", "z_star_re", "z_star_im"]);
    for (i, z) in path.z_star.iter().enumerate() {
        t.push(vec![path.grid().t(i), z.re, z.im]);
    }
    t
}

pub fn amplitude_table(resp: &AmplitudeResponse) -> Table {
    let mut t = Table::new(["t", "c_re", "c_im", "C_re", "C_im", "flagged"]);
    for i in 0..resp.amp_c.len() {
        let (c, cc) = (resp.amp_c[i], resp.big_c[i]);
        t.push(vec![resp.grid().t(i), c.re, c.im, cc.re, cc.im, f64::from(u8::from(resp.flagged[i]))]);
    }
    t
}

pub fn classical_table(sol: &ClassicalSolution) -> Table {
    let mut t = Table::new(["t", "q", "q_dot", "q_ddot", "q_dddot", "denominator"]);
    for i in 0..sol.q.len() {
        t.push(vec![sol.grid().t(i), sol.q[i], sol.q_dot[i], sol.q_ddot[i], sol.q_dddot[i], sol.denominator(i)]);
    }
    t
}

pub fn me_coeffs_table(c: &QbmMeCoeffs) -> Table {
    let mut t = Table::new(["t", "a", "b", "c", "d"]);
    for i in 0..c.a_t.len() {
        t.push(vec![c.grid().t(i), c.a_t[i], c.b_t[i], c.c_pq[i], c.d_qq[i]]);
    }
    t
}

pub fn sse_coeffs_table(c: &QbmSseCoeffs) -> Table {
    let mut t = Table::new(["t", "F_re", "F_im", "G_re", "G_im"]);
    for i in 0..c.big_f.len() {
        t.push(vec![c.grid().t(i), c.big_f[i].re, c.big_f[i].im, c.big_g[i].re, c.big_g[i].im]);
    }
    t
}

pub fn moments_table(approx: &ApproxObar) -> Table {
    let mut t = Table::new(["t", "A0_re", "A0_im", "A1_re", "A1_im"]);
    for (i, tau) in approx.a0.grid().times().enumerate() {
        let (a0, a1) = (approx.a0.get(i), approx.a1.get(i));
        t.push(vec![tau, a0.re, a0.im, a1.re, a1.im]);
    }
    t
}

pub fn observables_table(rows: &[ObservableRow]) -> Table {
    let mut t = Table::new(["t", "q", "p", "var_q", "var_p", "cov_qp", "number", "purity", "trace"]);
    for r in rows {
        t.push(vec![r.t, r.q, r.p, r.var_q, r.var_p, r.cov_qp, r.number, r.purity, r.trace]);
    }
    t
}

/// Ensemble means with standard errors of tracked operators, named by `names`.
pub fn tracked_table(times: &[f64], names: &[&str], tracked: &[TrackedObservable]) -> Table {
    let mut cols = vec!["t".to_string()];
    for n in names {
        for suffix in ["re", "im", "se_re", "se_im"] {
            cols.push(format!("{n}_{suffix}"));
        }
    }
    let mut t = Table::new(cols);
    for (i, &tau) in times.iter().enumerate() {
        let mut row = vec![tau];
        for obs in tracked {
            let (m, (sr, si)) = (obs.mean[i], obs.stderr[i]);
            row.extend([m.re, m.im, sr, si]);
        }
        t.push(row);
    }
    t
}

pub fn trace_distance_table(times: &[f64], distance: &[f64]) -> Table {
    let mut t = Table::new(["t", "trace_distance"]);
    for (&tau, &d) in times.iter().zip(distance) {
        t.push(vec![tau, d]);
    }
    t
}

/// Row-major `rho_jk` as `re_j_k`, `im_j_k` columns.
pub fn density_table(series: &DensitySeries) -> Table {
    let n = series.states.first().map_or(0, |m| m.nrows());
    let mut cols = vec!["t".to_string()];
    for j in 0..n {
        for k in 0..n {
            cols.push(format!("re_{j}_{k}"));
            cols.push(format!("im_{j}_{k}"));
        }
    }
    let mut t = Table::new(cols);
    for (&tau, rho) in series.times.iter().zip(&series.states) {
        let mut row = Vec::with_capacity(1 + 2 * n * n);
        row.push(tau);
        for j in 0..n {
            for k in 0..n {
                row.extend([rho[(j, k)].re, rho[(j, k)].im]);
            }
        }
        t.push(row);
    }
    t
}

pub fn density_from_table(table: &Table) -> Result<DensitySeries> {
    let width = table.columns.len().saturating_sub(1) / 2;
    let n = (width as f64).sqrt().round() as usize;
    if table.columns.first().map(String::as_str) != Some("t") || n * n != width || 1 + 2 * n * n != table.columns.len() {
        return Err(Error::InvalidParameter("not a density table".into()));
    }
    let times = table.rows.iter().map(|r| r[0]).collect();
    let states = table
        .rows
        .iter()
        .map(|r| CMatrix::from_fn(n, n, |j, k| C64::new(r[1 + 2 * (j * n + k)], r[2 + 2 * (j * n + k)])))
        .collect();
    Ok(DensitySeries::new(times, states))
}
