//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test -p nmqsd-core --test acceptance -- 3 5`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nmqsd::approx::weak_coupling_obar;
use nmqsd::linalg::{hermiticity_defect, projector, CVector, C64};
use nmqsd::master::{integrate_convolutionless_me, integrate_lindblad, integrate_rwa_exact, observables, trace_distance, DensitySeries};
use nmqsd::noise::{estimate_statistics, sample_covariance_factorization, sample_mode_sum, CovarianceSampler, ModeSumSampler, NoiseSource};
use nmqsd::oracle::{build_full_model, run_oracle, CouplingKind};
use nmqsd::qbm::{drift_closed_form, evolve_sse_coeffs, me_coefficients, me_coefficients_with, wxyz_closed_form, MeOptions, QbmMeCoeffs};
use nmqsd::quadrature::QuadratureRule;
use nmqsd::trajectories::{run_ensemble, ConvolutionlessSse, QbmSse};
use nmqsd::{
    build_system, discretize_bath, kernel_from_bath, make_kernel, solve_amplitude, solve_classical_motion, BathKernel,
    DiscreteBath, DiscretizationScheme, OperatorSeries, SpectralDensity, SystemKind, SystemModel, TimeGrid, Units,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

/// The 4-mode zero-temperature bath shared by criteria 4 to 6 (modes at 0.75, 2.25, 3.75, 5.25).
/// Weak enough that five Fock states per mode are converged to 1e-4 in trace distance.
fn four_mode_bath() -> DiscreteBath {
    let j = SpectralDensity::ohmic_exponential(0.02, 5.0, 1.0).unwrap();
    discretize_bath(&j, 0.0, Units::default(), 4, 6.0, DiscretizationScheme::UniformMidpoint).unwrap().with_mass(1.0)
}

fn qbm_coefficients(kernel: &BathKernel, grid: &TimeGrid, options: MeOptions) -> QbmMeCoeffs {
    let cl = solve_classical_motion(kernel, 1.0, 1.0, grid).unwrap();
    me_coefficients_with(kernel, &cl, options).unwrap()
}

fn criterion_1() -> Outcome {
    let grid = TimeGrid::new(0.05, 200).unwrap();
    let n = 20_000;
    let j = SpectralDensity::ohmic_exponential(0.1, 5.0, 1.0).unwrap();
    let kernel = make_kernel(&j, 0.0, &grid, Units::default()).unwrap();
    let band = 5.0 * kernel.alpha(0).re / (n as f64).sqrt();

    let cov = estimate_statistics(&sample_covariance_factorization(&kernel, &grid, n, 11).unwrap()).unwrap();
    let (cov_err, cov_pseudo) = (cov.covariance_error(&kernel), cov.max_pseudo());

    // Mode spacing 0.5 puts the recurrence time 4 pi beyond the window.
    let bath = discretize_bath(&j, 0.0, Units::default(), 400, 200.0, DiscretizationScheme::UniformMidpoint).unwrap();
    let bath_kernel = kernel_from_bath(&bath, &grid, 1.0);
    let ms = estimate_statistics(&sample_mode_sum(&bath, &grid, n, 12).unwrap()).unwrap();
    let (ms_err, ms_pseudo) = (ms.covariance_error(&bath_kernel), ms.max_pseudo());
    let discretization = max_of((0..grid.len()).map(|k| (bath_kernel.alpha(k as isize) - kernel.alpha(k as isize)).norm()));

    let pass = cov_err <= band && cov_pseudo <= band && ms_err <= band && ms_pseudo <= band;
    outcome(
        pass,
        format!(
            "band {band:.4}; factorization cov {cov_err:.4} pseudo {cov_pseudo:.4}; mode sum cov {ms_err:.4} pseudo {ms_pseudo:.4} (mode-sum kernel vs continuum {discretization:.1e})"
        ),
    )
}

fn criterion_2() -> Outcome {
    let gamma = 0.1;
    let grid = TimeGrid::new(0.002, 1000).unwrap();
    let kernel = BathKernel::exponential(grid, 1.0, gamma, 50.0, 0.0);
    let resp = solve_amplitude(&kernel, 1.0, &grid).unwrap();
    let c_inf = resp.big_c[grid.n_steps()];
    let rel = (c_inf - C64::from(gamma / 2.0)).norm() / (gamma / 2.0);

    let mut worst: f64 = 0.0;
    let t_grid = TimeGrid::new(0.01, 1000).unwrap();
    for kind in [SystemKind::TwoLevel, SystemKind::Oscillator] {
        let s = build_system(1.0, 1.0, 1.0, 10, kind).unwrap();
        let psi = if kind == SystemKind::TwoLevel {
            CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)])
        } else {
            s.coherent_state(C64::new(1.0, 0.5))
        };
        let rho0 = projector(&psi);
        let obar = OperatorSeries::constant(t_grid, &s.a * C64::from(gamma / 2.0));
        let a = integrate_convolutionless_me(&s.h, &s.a, &obar, &rho0, &t_grid, 1.0, 10).unwrap();
        let b = integrate_lindblad(&s.h, &(&s.a * C64::from(gamma.sqrt())), &rho0, &t_grid, 1.0, 10).unwrap();
        worst = worst.max(max_of(trace_distance(&a, &b).unwrap()));
    }
    outcome(rel <= 0.05 && worst <= 1e-10, format!("C(t=2) relative to gamma/2 off by {rel:.2e}; convolutionless vs Lindblad {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let grid = TimeGrid::new(0.02, 500).unwrap();
    let kernel = BathKernel::exponential(grid, 1.0, 0.3, 0.5, 1.0);
    let s = build_system(1.0, 1.0, 1.0, 30, SystemKind::Oscillator).unwrap();
    let beta = C64::new(1.0, 0.0);
    let psi0 = s.coherent_state(beta);
    let resp = solve_amplitude(&kernel, 1.0, &grid).unwrap();
    let stride = 25;
    let exact = integrate_rwa_exact(&s, &resp, &projector(&psi0), &grid, stride).unwrap();

    let c = resp.c_series().unwrap();
    let obar = c.map(|ct| &s.a * *ct);
    let sse = ConvolutionlessSse::new(&s, &s.a, &obar, &grid, stride).unwrap();
    let sampler = CovarianceSampler::new(&kernel, &grid).unwrap();
    let ens = run_ensemble(5000, rayon::current_num_threads(), std::slice::from_ref(&s.a), |i| sse.run(&sampler.path(31, i), &psi0)).unwrap();
    let td = max_of(trace_distance(&ens.density, &exact).unwrap());

    let a0 = psi0.dotc(&(&s.a * &psi0));
    let tracked = &ens.tracked[0];
    let mut worst_sigma: f64 = 0.0;
    for (k, &t) in ens.density.times.iter().enumerate() {
        let target = resp.amp_c[(t / grid.dt()).round() as usize] * a0;
        let (m, (sr, si)) = (tracked.mean[k], tracked.stderr[k]);
        if sr > 0.0 {
            worst_sigma = worst_sigma.max((m.re - target.re).abs() / sr);
        }
        if si > 0.0 {
            worst_sigma = worst_sigma.max((m.im - target.im).abs() / si);
        }
    }
    outcome(
        td <= 0.02 && worst_sigma <= 3.0,
        format!("max trace distance {td:.4}; worst <a> deviation {worst_sigma:.2} standard errors over {} sample times", ens.density.len()),
    )
}

fn criterion_4() -> Outcome {
    let grid = TimeGrid::new(0.01, 1000).unwrap();
    let drift_only = MeOptions { diffusion: false, ..MeOptions::default() };
    let j = SpectralDensity::ohmic_exponential(0.05, 5.0, 1.0).unwrap();
    let kernels = [
        ("4-mode", kernel_from_bath(&four_mode_bath(), &grid, 1.0)),
        ("continuum", make_kernel(&j, 0.0, &grid, Units::default()).unwrap()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, kernel) in &kernels {
        let mut rels = Vec::new();
        for rule in [QuadratureRule::SimpsonComposite, QuadratureRule::Trapezoid] {
            let me = qbm_coefficients(kernel, &grid, MeOptions { rule, ..drift_only });
            let closed: Vec<(f64, f64)> = (0..grid.len()).map(|i| drift_closed_form(&me.classical, i).unwrap()).collect();
            let rel = |num: &[f64], f: fn(&(f64, f64)) -> f64| {
                let scale = max_of(closed.iter().map(|c| f(c).abs()));
                max_of(num.iter().zip(&closed).map(|(n, c)| (n - f(c)).abs())) / scale
            };
            rels.push(rel(&me.a_t, |c| c.0).max(rel(&me.b_t, |c| c.1)));
        }
        pass &= rels[0] <= 1e-4;
        parts.push(format!("{name} {:.1e} (trapezoid variant {:.1e})", rels[0], rels[1]));
    }
    outcome(pass, format!("max relative a,b difference: {}", parts.join("; ")))
}

struct QbmSetup {
    system: SystemModel,
    psi0: CVector,
    grid: TimeGrid,
    kernel: BathKernel,
    bath: DiscreteBath,
    me: QbmMeCoeffs,
    series: DensitySeries,
}

fn qbm_setup(stride: usize) -> QbmSetup {
    let grid = TimeGrid::new(0.01, 800).unwrap();
    let bath = four_mode_bath();
    let kernel = kernel_from_bath(&bath, &grid, 1.0);
    let system = build_system(1.0, 1.0, 1.0, 12, SystemKind::Oscillator).unwrap();
    let psi0 = system.coherent_state(C64::new(1.0, 0.0));
    let me = qbm_coefficients(&kernel, &grid, MeOptions::default());
    let series = nmqsd::integrate_qbm_me(&system, &me, &projector(&psi0), &grid, stride).unwrap();
    QbmSetup { system, psi0, grid, kernel, bath, me, series }
}

fn criterion_5() -> Outcome {
    let stride = 10;
    let setup = qbm_setup(stride);
    let model = build_full_model(&setup.system, &setup.bath, &[5; 4], CouplingKind::Position).unwrap();
    let oracle = run_oracle(&model, &setup.psi0, &setup.grid, stride).unwrap();
    let td_oracle = max_of(trace_distance(&setup.series, &oracle.reduced).unwrap());

    let coeffs = evolve_sse_coeffs(&setup.kernel, 1.0, 1.0, &setup.grid).unwrap();
    let sse = QbmSse::new(&setup.system, &coeffs, stride).unwrap();
    let sampler = ModeSumSampler::new(&setup.bath, &setup.grid).unwrap();
    let ens = run_ensemble(2000, rayon::current_num_threads(), &[], |i| sse.run(&sampler.path(51, i), &setup.psi0)).unwrap();
    let td_sse = max_of(trace_distance(&ens.density, &setup.series).unwrap());
    outcome(
        td_oracle <= 1e-3 && td_sse <= 0.05,
        format!("ME vs oracle {td_oracle:.2e} (dim {}); SSE ensemble vs ME {td_sse:.4}", model.total_dim),
    )
}

/// Fourth-order central differences at interior samples.
fn derivative(v: &[f64], h: f64) -> Vec<(usize, f64)> {
    (2..v.len() - 2).map(|k| (k, (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h))).collect()
}

fn criterion_6() -> Outcome {
    let setup = qbm_setup(1);
    let rows = observables(&setup.series, &setup.system).unwrap();
    let q: Vec<f64> = rows.iter().map(|r| r.q).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let h = setup.grid.dt();
    let (m, w) = (1.0, 1.0);
    let dq = derivative(&q, h);
    let dp = derivative(&p, h);
    let res_q = max_of(dq.iter().map(|&(k, d)| (d - p[k] / m).abs())) / max_of(dq.iter().map(|x| x.1.abs()));
    let res_p = max_of(dp.iter().map(|&(k, d)| (d + (m * w * w + setup.me.a_t[k]) * q[k] + setup.me.b_t[k] * p[k]).abs()))
        / max_of(dp.iter().map(|x| x.1.abs()));
    outcome(res_q.max(res_p) <= 1e-3, format!("relative residual dq/dt {res_q:.1e}, dp/dt {res_p:.1e}"))
}

fn criterion_7() -> Outcome {
    let t_max = 10.0;
    // Errors of every quantity at step dt, as (name, error).
    let errors = |dt: f64| -> Vec<(&'static str, f64)> {
        let grid = TimeGrid::covering(dt, t_max).unwrap();
        let n = grid.n_steps();
        let k = BathKernel::zero(grid, 1.0);
        let sse = evolve_sse_coeffs(&k, 1.0, 1.0, &grid).unwrap();
        let cl = solve_classical_motion(&k, 1.0, 1.0, &grid).unwrap();
        let me = me_coefficients(&k, &cl).unwrap();
        let (mut ef, mut eg, mut ew, mut ex, mut ey, mut ez) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..=n {
            let row = wxyz_closed_form(&cl, &k, i, QuadratureRule::SimpsonComposite).unwrap();
            for s in 0..=i {
                let tau = grid.t(i) - grid.t(s);
                ef = ef.max((sse.f[i][s] - C64::from(tau.cos())).norm());
                eg = eg.max((sse.g[i][s] + C64::from(tau.sin())).norm());
                ew = ew.max((row.w[s] - tau.cos()).abs());
                ex = ex.max((row.x[s] + tau.sin()).abs());
                ey = ey.max((row.y[s] - C64::from(tau.cos())).norm());
                ez = ez.max((row.z[s] - C64::from(tau.sin())).norm());
            }
        }
        let eq = max_of(grid.times().zip(&cl.q).map(|(t, q)| (q - t.sin()).abs()));
        let eabcd = max_of(me.a_t.iter().chain(&me.b_t).chain(&me.c_pq).chain(&me.d_qq).map(|v| v.abs()));
        vec![("f", ef), ("g", eg), ("q", eq), ("w", ew), ("x", ex), ("y", ey), ("z", ez), ("abcd", eabcd)]
    };
    let (dt1, dt2) = (0.1, 0.05);
    let (coarse, fine) = (errors(dt1), errors(dt2));
    let mut pass = true;
    let mut parts = Vec::new();
    for ((name, e1), (_, e2)) in coarse.iter().zip(&fine) {
        if *e1 == 0.0 && *e2 == 0.0 {
            parts.push(format!("{name} exactly 0"));
            continue;
        }
        let order = (e1 / e2).log2();
        pass &= order >= 1.9;
        parts.push(format!("{name} order {order:.2} (C {:.1e})", e2 / (dt2 * dt2)));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_8() -> Outcome {
    let grid = TimeGrid::new(0.01, 1000).unwrap();
    let s = build_system(1.0, 1.0, 1.0, 12, SystemKind::Oscillator).unwrap();
    let rho0 = projector(&s.coherent_state(C64::new(1.0, 0.0)));
    let l = s.position_coupling().unwrap();
    let stride = 10;
    let distance = |gamma: f64| {
        let j = SpectralDensity::ohmic_exponential(gamma, 5.0, 1.0).unwrap();
        let kernel = make_kernel(&j, 0.0, &grid, Units::default()).unwrap();
        let me = qbm_coefficients(&kernel, &grid, MeOptions::default());
        let exact = nmqsd::integrate_qbm_me(&s, &me, &rho0, &grid, stride).unwrap();
        let wc = weak_coupling_obar(&s.h, &l, &kernel, &grid, 1.0).unwrap();
        let redfield = integrate_convolutionless_me(&s.h, &l, &wc.obar, &rho0, &grid, 1.0, stride).unwrap();
        max_of(trace_distance(&exact, &redfield).unwrap())
    };
    let (d1, d2) = (distance(0.02), distance(0.01));
    let ratio = d1 / d2;
    outcome((2.5..=6.0).contains(&ratio), format!("max trace distance {d1:.3e} (gamma 0.02) / {d2:.3e} (gamma 0.01) = {ratio:.2}"))
}

fn criterion_9() -> Outcome {
    let grid = TimeGrid::new(0.01, 800).unwrap();
    let t_max = grid.t_max();
    let mut trace_rate: f64 = 0.0;
    let mut herm: f64 = 0.0;
    let mut check = |name: &str, series: DensitySeries, acc: &mut Vec<String>| {
        let rate = max_of(series.states.iter().map(|r| (r.trace().re - 1.0).abs())) / t_max;
        let h = series.hermiticity_defect.max(max_of(series.states.iter().map(hermiticity_defect)));
        trace_rate = trace_rate.max(rate);
        herm = herm.max(h);
        acc.push(format!("{name} {rate:.1e}/{h:.0e}"));
    };
    let mut parts = Vec::new();
    let setup = qbm_setup(10);
    check("qbm", setup.series.clone(), &mut parts);
    let s = &setup.system;
    let rho0 = projector(&setup.psi0);
    let kernel = BathKernel::exponential(grid, 1.0, 0.3, 0.5, 1.0);
    let resp = solve_amplitude(&kernel, 1.0, &grid).unwrap();
    check("rwa", integrate_rwa_exact(s, &resp, &rho0, &grid, 10).unwrap(), &mut parts);
    check("lindblad", integrate_lindblad(&s.h, &(&s.a * C64::from(0.3)), &rho0, &grid, 1.0, 10).unwrap(), &mut parts);
    let l = s.position_coupling().unwrap();
    let wc = weak_coupling_obar(&s.h, &l, &setup.kernel, &grid, 1.0).unwrap();
    check("redfield", integrate_convolutionless_me(&s.h, &l, &wc.obar, &rho0, &grid, 1.0, 10).unwrap(), &mut parts);

    let model = build_full_model(s, &setup.bath, &[5; 4], CouplingKind::Position).unwrap();
    let oracle = run_oracle(&model, &setup.psi0, &grid, 10).unwrap();
    let pass = trace_rate <= 1e-8 && herm <= 1e-12 && oracle.norm_drift <= 1e-8 && oracle.energy_drift <= 1e-8;
    outcome(
        pass,
        format!(
            "trace drift per unit time / Hermiticity defect: {}; oracle norm {:.1e}, energy {:.1e}",
            parts.join(", "),
            oracle.norm_drift,
            oracle.energy_drift
        ),
    )
}

/// Name, check and runtime budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

const CRITERIA: [Criterion; 9] = [
    ("noise fidelity", criterion_1, Duration::from_secs(60)),
    ("Markov reduction chain", criterion_2, Duration::MAX),
    ("RWA exact-model closure", criterion_3, Duration::from_secs(300)),
    ("QBM coefficient dual route", criterion_4, Duration::MAX),
    ("QBM three-way agreement", criterion_5, Duration::from_secs(900)),
    ("moment closure", criterion_6, Duration::MAX),
    ("zero-coupling analytics", criterion_7, Duration::MAX),
    ("weak-coupling scaling", criterion_8, Duration::MAX),
    ("conservation suite", criterion_9, Duration::MAX),
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, run, budget)) in CRITERIA.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let within = elapsed <= *budget;
        let pass = out.pass && within;
        let budget_note = if *budget == Duration::MAX { String::new() } else { format!(" budget {}s", budget.as_secs()) };
        println!(
            "criterion {id} {name}: {} | {} | {:.1}s{budget_note}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        failed += usize::from(!pass);
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
