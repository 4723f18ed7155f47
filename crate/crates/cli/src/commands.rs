//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use nmqsd::export::{
    amplitude_table, density_from_table, density_table, kernel_table, me_coeffs_table, moments_table, noise_path_table,
    observables_table, sse_coeffs_table, trace_distance_table, tracked_table, Table,
};
use nmqsd::master::integrate_rwa_exact;
use nmqsd::trajectories::{ConvolutionlessSse, QbmSse};
use nmqsd::{
    alpha_moments, build_full_model, estimate_statistics, evolve_sse_coeffs, integrate_convolutionless_me, integrate_lindblad,
    integrate_markov_qsd, integrate_qbm_me, me_coefficients, observables, post_markov_obar, run_ensemble, run_oracle,
    solve_amplitude, solve_classical_motion, trace_distance, weak_coupling_obar, ApproxObar, CMatrix, CouplingKind,
    DensitySeries, EnsembleResult, QbmMeCoeffs, C64,
};

use crate::config::{Coupling, Dump, ExperimentConfig, Scheme};
use crate::error::{CliError, CliResult};
use crate::setup::Setup;

/// Everything a subcommand needs besides the configuration itself.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Context {
    fn dumps(&self, d: Dump) -> bool {
        self.cfg.output.dump.contains(&d)
    }

    fn write(&self, name: &str, table: &Table, command: &str, extra: &[(&str, String)]) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        let mut meta: Vec<(&str, String)> = vec![
            ("config_sha256", self.config_hash.clone()),
            ("seed", self.seed.to_string()),
            ("command", command.to_string()),
            ("scheme", scheme_name(self.cfg.run.scheme).to_string()),
        ];
        meta.extend(extra.iter().cloned());
        table.write(BufWriter::new(File::create(&path)?), &meta)?;
        Ok(path)
    }

    fn write_series(&self, prefix: &str, series: &DensitySeries, setup: &Setup, extra: &[(&str, String)]) -> CliResult<()> {
        if self.dumps(Dump::Observables) {
            self.write(&format!("{prefix}_observables.csv"), &observables_table(&observables(series, &setup.system)?), prefix, extra)?;
        }
        if self.dumps(Dump::Density) {
            self.write(&format!("{prefix}_density.csv"), &density_table(series), prefix, extra)?;
        }
        Ok(())
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Markov => "markov",
        Scheme::RwaExact => "rwa-exact",
        Scheme::QbmSse => "qbm-sse",
        Scheme::QbmMe => "qbm-me",
        Scheme::Redfield => "redfield",
        Scheme::PostMarkov => "post-markov",
        Scheme::Oracle => "oracle",
        Scheme::Compare => "compare",
    }
}

fn require_coupling(cfg: &ExperimentConfig, want: Coupling, scheme: Scheme) -> CliResult<()> {
    if cfg.model.coupling != want {
        let name = match want {
            Coupling::Position => "position",
            Coupling::RotatingWave => "rotating-wave",
        };
        return Err(CliError::Validation(format!("scheme {} needs {name} coupling", scheme_name(scheme))));
    }
    Ok(())
}

/// Lindblad rate: configured, or `2 Re int_0^t_max alpha`.
fn markov_rate(cfg: &ExperimentConfig, setup: &Setup) -> CliResult<f64> {
    if let Some(r) = cfg.run.markov_rate {
        return Ok(r);
    }
    let (a0, _) = alpha_moments(&setup.kernel, &setup.grid)?;
    Ok(2.0 * a0.values().last().map_or(0.0, |v| v.re))
}

fn approx_obar(cfg: &ExperimentConfig, setup: &Setup, scheme: Scheme) -> CliResult<ApproxObar> {
    let (h, l, hbar) = (&setup.system.h, &setup.l, setup.units.hbar);
    Ok(match scheme {
        Scheme::Redfield => weak_coupling_obar(h, l, &setup.kernel, &setup.grid, hbar)?,
        _ => post_markov_obar(h, l, &setup.kernel, &setup.grid, hbar, cfg.run.post_markov_order)?,
    })
}

fn qbm_me_coeffs(setup: &Setup) -> CliResult<QbmMeCoeffs> {
    let s = &setup.system;
    let cl = solve_classical_motion(&setup.kernel, s.omega, s.mass, &setup.grid)?;
    Ok(me_coefficients(&setup.kernel, &cl)?)
}

fn master_series(ctx: &Context, setup: &Setup, scheme: Scheme) -> CliResult<DensitySeries> {
    let cfg = &ctx.cfg;
    let (rho0, grid, stride, hbar) = (setup.rho0(), &setup.grid, cfg.run.stride, setup.units.hbar);
    match scheme {
        Scheme::Markov => {
            let l = &setup.l * C64::from(markov_rate(cfg, setup)?.max(0.0).sqrt());
            Ok(integrate_lindblad(&setup.system.h, &l, &rho0, grid, hbar, stride)?)
        }
        Scheme::RwaExact => {
            require_coupling(cfg, Coupling::RotatingWave, scheme)?;
            let resp = solve_amplitude(&setup.kernel, setup.system.omega, grid)?;
            Ok(integrate_rwa_exact(&setup.system, &resp, &rho0, grid, stride)?)
        }
        Scheme::QbmSse | Scheme::QbmMe => {
            require_coupling(cfg, Coupling::Position, scheme)?;
            Ok(integrate_qbm_me(&setup.system, &qbm_me_coeffs(setup)?, &rho0, grid, stride)?)
        }
        Scheme::Redfield | Scheme::PostMarkov => {
            let approx = approx_obar(cfg, setup, scheme)?;
            Ok(integrate_convolutionless_me(&setup.system.h, &setup.l, &approx.obar, &rho0, grid, hbar, stride)?)
        }
        Scheme::Oracle | Scheme::Compare => Err(CliError::Validation(format!(
            "scheme {} has no master equation; use the oracle or compare subcommand",
            scheme_name(scheme)
        ))),
    }
}

/// Operators whose ensemble means are tracked, with their column names.
fn tracked_ops(setup: &Setup) -> (Vec<&'static str>, Vec<CMatrix>) {
    let s = &setup.system;
    match (&s.q, &s.p) {
        (Some(q), Some(p)) => (vec!["a", "q", "p"], vec![s.a.clone(), q.clone(), p.clone()]),
        _ => (vec!["a"], vec![s.a.clone()]),
    }
}

fn trajectory_ensemble(ctx: &Context, setup: &Setup, scheme: Scheme) -> CliResult<EnsembleResult> {
    let cfg = &ctx.cfg;
    let (grid, stride, n, seed, workers) = (&setup.grid, cfg.run.stride, cfg.run.n_traj, ctx.seed, ctx.workers);
    let (_, ops) = tracked_ops(setup);
    let psi0 = &setup.psi0;
    match scheme {
        Scheme::Markov => {
            let rate = markov_rate(cfg, setup)?.max(0.0);
            Ok(integrate_markov_qsd(&setup.system, &setup.l, rate, psi0, grid, seed, n, stride, workers, &ops)?)
        }
        Scheme::RwaExact => {
            require_coupling(cfg, Coupling::RotatingWave, scheme)?;
            let c = solve_amplitude(&setup.kernel, setup.system.omega, grid)?.c_series()?;
            let obar = c.map(|ct| &setup.l * *ct);
            let sse = ConvolutionlessSse::new(&setup.system, &setup.l, &obar, grid, stride)?;
            let source = setup.noise_source(cfg.run.sampler)?;
            Ok(run_ensemble(n, workers, &ops, |i| sse.run(&source.path(seed, i), psi0))?)
        }
        Scheme::QbmSse | Scheme::QbmMe => {
            require_coupling(cfg, Coupling::Position, scheme)?;
            let s = &setup.system;
            let coeffs = evolve_sse_coeffs(&setup.kernel, s.omega, s.mass, grid)?;
            let sse = QbmSse::new(s, &coeffs, stride)?;
            let source = setup.noise_source(cfg.run.sampler)?;
            Ok(run_ensemble(n, workers, &ops, |i| sse.run(&source.path(seed, i), psi0))?)
        }
        Scheme::Redfield | Scheme::PostMarkov => {
            let approx = approx_obar(cfg, setup, scheme)?;
            let sse = ConvolutionlessSse::new(&setup.system, &setup.l, &approx.obar, grid, stride)?;
            let source = setup.noise_source(cfg.run.sampler)?;
            Ok(run_ensemble(n, workers, &ops, |i| sse.run(&source.path(seed, i), psi0))?)
        }
        Scheme::Oracle | Scheme::Compare => Err(CliError::Validation(format!(
            "scheme {} has no trajectory unraveling; use the oracle or compare subcommand",
            scheme_name(scheme)
        ))),
    }
}

struct OracleOutput {
    series: DensitySeries,
    meta: Vec<(&'static str, String)>,
}

fn oracle_series(ctx: &Context, setup: &Setup) -> CliResult<OracleOutput> {
    let bath = setup
        .bath
        .as_ref()
        .ok_or_else(|| CliError::Validation("the oracle needs explicit `modes` or a `discretize` block".into()))?;
    let coupling = match ctx.cfg.model.coupling {
        Coupling::Position => CouplingKind::Position,
        Coupling::RotatingWave => CouplingKind::RotatingWave,
    };
    let dims = vec![ctx.cfg.bath.oracle_mode_dim; bath.len()];
    let model = build_full_model(&setup.system, bath, &dims, coupling)?;
    let run = run_oracle(&model, &setup.psi0, &setup.grid, ctx.cfg.run.stride)?;
    let meta = vec![
        ("total_dim", model.total_dim.to_string()),
        ("norm_drift", format!("{:e}", run.norm_drift)),
        ("energy_drift", format!("{:e}", run.energy_drift)),
    ];
    Ok(OracleOutput { series: run.reduced, meta })
}

pub fn coeffs(ctx: &Context) -> CliResult<()> {
    let setup = Setup::new(&ctx.cfg)?;
    if ctx.dumps(Dump::Kernel) {
        ctx.write("kernel.csv", &kernel_table(&setup.kernel), "coeffs", &[])?;
    }
    match ctx.cfg.model.coupling {
        Coupling::Position => {
            let me = qbm_me_coeffs(&setup)?;
            ctx.write("me_coeffs.csv", &me_coeffs_table(&me), "coeffs", &[])?;
            let s = &setup.system;
            let sse = evolve_sse_coeffs(&setup.kernel, s.omega, s.mass, &setup.grid)?;
            ctx.write("sse_coeffs.csv", &sse_coeffs_table(&sse), "coeffs", &[])?;
        }
        Coupling::RotatingWave => {
            let resp = solve_amplitude(&setup.kernel, setup.system.omega, &setup.grid)?;
            ctx.write("amplitude.csv", &amplitude_table(&resp), "coeffs", &[])?;
            if resp.has_flags() {
                eprintln!("warning: C(t) is undefined where c(t) vanishes; those rows are flagged");
            }
        }
    }
    if matches!(ctx.cfg.run.scheme, Scheme::Redfield | Scheme::PostMarkov) {
        let approx = approx_obar(&ctx.cfg, &setup, ctx.cfg.run.scheme)?;
        ctx.write("moments.csv", &moments_table(&approx), "coeffs", &[])?;
    }
    Ok(())
}

pub fn noise_check(ctx: &Context) -> CliResult<()> {
    let setup = Setup::new(&ctx.cfg)?;
    let source = setup.noise_source(ctx.cfg.run.sampler)?;
    let n = ctx.cfg.run.n_traj;
    let paths: Vec<_> = (0..n as u64).map(|i| source.path(ctx.seed, i)).collect();
    let stats = estimate_statistics(&paths)?;
    let alpha0 = setup.kernel.alpha(0).re;
    let band = 5.0 * alpha0 / (n as f64).sqrt();
    let (cov, pseudo) = (stats.covariance_error(&setup.kernel), stats.max_pseudo());
    let mut t = Table::new(["n_samples", "alpha0", "band", "covariance_error", "max_pseudo"]);
    t.push(vec![n as f64, alpha0, band, cov, pseudo]);
    ctx.write("noise_check.csv", &t, "noise-check", &[])?;
    if ctx.dumps(Dump::Noise) {
        ctx.write("noise_path.csv", &noise_path_table(&paths[0]), "noise-check", &[])?;
    }
    let verdict = if cov <= band && pseudo <= band { "within" } else { "OUTSIDE" };
    println!("noise-check: max|C_hat - C| = {cov:.3e}, max|P_hat| = {pseudo:.3e}, {verdict} band {band:.3e}");
    Ok(())
}

fn method_scheme(cfg: &ExperimentConfig) -> CliResult<Scheme> {
    match (cfg.run.compare_scheme, cfg.run.scheme) {
        (Some(s), _) => Ok(s),
        (None, Scheme::Oracle | Scheme::Compare) => {
            Err(CliError::Validation("set run.compare_scheme to pick the trajectory or master-equation scheme".into()))
        }
        (None, s) => Ok(s),
    }
}

pub fn trajectories(ctx: &Context) -> CliResult<()> {
    let setup = Setup::new(&ctx.cfg)?;
    let ens = trajectory_ensemble(ctx, &setup, method_scheme(&ctx.cfg)?)?;
    let extra = ensemble_meta(&ens);
    ctx.write_series("trajectories", &ens.density, &setup, &extra)?;
    if ctx.dumps(Dump::Tracked) {
        let (names, _) = tracked_ops(&setup);
        ctx.write("trajectories_tracked.csv", &tracked_table(&ens.density.times, &names, &ens.tracked), "trajectories", &extra)?;
    }
    Ok(())
}

fn ensemble_meta(ens: &EnsembleResult) -> Vec<(&'static str, String)> {
    if ens.truncation_flagged > 0 {
        eprintln!(
            "warning: {} trajectories exceeded the Fock-tail threshold (max tail population {:e})",
            ens.truncation_flagged, ens.max_tail_population
        );
    }
    vec![
        ("n_traj", ens.n_traj.to_string()),
        ("truncation_flagged", ens.truncation_flagged.to_string()),
        ("max_tail_population", format!("{:e}", ens.max_tail_population)),
    ]
}

pub fn master(ctx: &Context) -> CliResult<()> {
    let setup = Setup::new(&ctx.cfg)?;
    let series = master_series(ctx, &setup, method_scheme(&ctx.cfg)?)?;
    ctx.write_series("master", &series, &setup, &[])
}

pub fn oracle(ctx: &Context) -> CliResult<()> {
    let setup = Setup::new(&ctx.cfg)?;
    let out = oracle_series(ctx, &setup)?;
    ctx.write_series("oracle", &out.series, &setup, &out.meta)
}

fn read_density(path: &Path) -> CliResult<DensitySeries> {
    let file = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let (table, _) = Table::read(BufReader::new(file))?;
    Ok(density_from_table(&table)?)
}

fn label(entry: &str) -> String {
    match entry {
        "trajectories" | "master" | "oracle" => entry.to_string(),
        path => Path::new(path).file_stem().map_or_else(|| path.to_string(), |s| s.to_string_lossy().into_owned()),
    }
}

/// Pairwise trace distances between every listed series.
pub fn compare(ctx: &Context) -> CliResult<()> {
    let entries = &ctx.cfg.run.compare;
    if entries.len() < 2 {
        return Err(CliError::Validation("run.compare must list at least two series".into()));
    }
    let setup = Setup::new(&ctx.cfg)?;
    let mut series = Vec::with_capacity(entries.len());
    for e in entries {
        let s = match e.as_str() {
            "trajectories" => trajectory_ensemble(ctx, &setup, method_scheme(&ctx.cfg)?)?.density,
            "master" => master_series(ctx, &setup, method_scheme(&ctx.cfg)?)?,
            "oracle" => oracle_series(ctx, &setup)?.series,
            path => read_density(Path::new(path))?,
        };
        series.push((label(e), s));
    }
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let ((na, a), (nb, b)) = (&series[i], &series[j]);
            if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-9) {
                return Err(CliError::Validation(format!("series {na} and {nb} are sampled at different times")));
            }
            let d = trace_distance(a, b)?;
            let max = d.iter().copied().fold(0.0, f64::max);
            let extra = [("left", na.clone()), ("right", nb.clone()), ("max_trace_distance", format!("{max:e}"))];
            ctx.write(&format!("compare_{na}_vs_{nb}.csv"), &trace_distance_table(&a.times, &d), "compare", &extra)?;
            println!("{na} vs {nb}: max trace distance {max:.6e}");
        }
    }
    Ok(())
}
