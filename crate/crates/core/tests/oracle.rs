//! The few-mode oracle against the exact master-equation coefficients.

use nmqsd::linalg::C64;
use nmqsd::master::observables;
use nmqsd::oracle::{bath_truncation_defect, build_full_model, run_oracle, CouplingKind};
use nmqsd::qbm::{me_coefficients_with, MeOptions};
use nmqsd::{build_system, discretize_bath, kernel_from_bath, solve_classical_motion, DiscreteBath, DiscretizationScheme, SpectralDensity, SystemKind, TimeGrid, Units};

fn bath(gamma: f64) -> DiscreteBath {
    let j = SpectralDensity::ohmic_exponential(gamma, 5.0, 1.0).unwrap();
    discretize_bath(&j, 0.0, Units::default(), 4, 6.0, DiscretizationScheme::UniformMidpoint).unwrap().with_mass(1.0)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

#[test]
fn oracle_moments_follow_the_drift_coefficients() {
    let grid = TimeGrid::new(0.01, 800).unwrap();
    let bath = bath(0.02);
    let s = build_system(1.0, 1.0, 1.0, 12, SystemKind::Oscillator).unwrap();
    let psi0 = s.coherent_state(C64::new(1.0, 0.0));
    let model = build_full_model(&s, &bath, &[5; 4], CouplingKind::Position).unwrap();
    let run = run_oracle(&model, &psi0, &grid, 1).unwrap();
    let rows = observables(&run.reduced, &s).unwrap();

    let kernel = kernel_from_bath(&bath, &grid, 1.0);
    let cl = solve_classical_motion(&kernel, 1.0, 1.0, &grid).unwrap();
    let me = me_coefficients_with(&kernel, &cl, MeOptions { diffusion: false, ..MeOptions::default() }).unwrap();

    let h = grid.dt();
    let q: Vec<f64> = rows.iter().map(|r| r.q).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let d = |v: &[f64], k: usize| (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h);
    let ks = 2..q.len() - 2;
    let res_q = max_of(ks.clone().map(|k| (d(&q, k) - p[k]).abs())) / max_of(ks.clone().map(|k| d(&q, k).abs()));
    let res_p = max_of(ks.clone().map(|k| (d(&p, k) + (1.0 + me.a_t[k]) * q[k] + me.b_t[k] * p[k]).abs()))
        / max_of(ks.map(|k| d(&p, k).abs()));
    assert!(res_q < 1e-3 && res_p < 1e-3, "relative residuals {res_q:e}, {res_p:e}");
}

/// Four modes recur after roughly `Omega t = 10`, so the envelope is checked on the window before that.
#[test]
fn system_energy_relaxes_before_recurrence() {
    let grid = TimeGrid::new(0.05, 189).unwrap();
    let bath = bath(0.05);
    let s = build_system(1.0, 1.0, 1.0, 10, SystemKind::Oscillator).unwrap();
    let psi0 = s.coherent_state(C64::new(1.2, 0.0));
    let model = build_full_model(&s, &bath, &[5; 4], CouplingKind::Position).unwrap();
    let run = run_oracle(&model, &psi0, &grid, 1).unwrap();
    let e: Vec<f64> = run.reduced.states.iter().map(|r| (r * &s.h).trace().re).collect();
    // Window maxima over spans of length pi.
    let peaks: Vec<f64> = e[1..].chunks(63).map(|c| max_of(c.iter().copied())).collect();
    assert_eq!(peaks.len(), 3);
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
    assert!(peaks[2] < 0.5 * e[0], "{peaks:?} vs initial {}", e[0]);
}

#[test]
fn bath_truncation_is_converged_at_accepted_settings() {
    let grid = TimeGrid::new(0.01, 800).unwrap();
    let s = build_system(1.0, 1.0, 1.0, 12, SystemKind::Oscillator).unwrap();
    let psi0 = s.coherent_state(C64::new(1.0, 0.0));
    let defect = bath_truncation_defect(&s, &bath(0.02), &[5; 4], CouplingKind::Position, &psi0, &grid, 10).unwrap();
    assert!(defect <= 1e-4, "raising the bath dimension moved the reduced state by {defect:e}");
}
