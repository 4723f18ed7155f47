//! Property tests of structural invariants.

use nmqsd::approx::{post_markov_obar, weak_coupling_obar};
use nmqsd::export::Table;
use nmqsd::linalg::{hermiticity_defect, hermitian_eigenvalues, max_abs, CMatrix, CVector, C64};
use nmqsd::master::{integrate_convolutionless_me, trace_distance_matrix};
use nmqsd::oracle::reduced_density;
use nmqsd::qbm::klmn_tables;
use nmqsd::{BathKernel, OperatorSeries, TimeGrid};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), n * n).prop_map(move |v| CMatrix::from_vec(n, n, v))
}

fn density(n: usize) -> impl Strategy<Value = CMatrix> {
    matrix(n).prop_map(|a| {
        let r = &a * a.adjoint() + CMatrix::identity(a.nrows(), a.nrows()) * C64::from(1e-3);
        let tr = r.trace();
        r / tr
    })
}

fn hermitian(n: usize) -> impl Strategy<Value = CMatrix> {
    matrix(n).prop_map(|a| (&a + a.adjoint()) * C64::from(0.5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_hermitian_under_mirroring(gamma in 0.01..2.0f64, kappa in 0.1..5.0f64, w0 in -3.0..3.0f64, k in 0isize..50) {
        let grid = TimeGrid::new(0.05, 50).unwrap();
        let ker = BathKernel::exponential(grid, 1.0, gamma, kappa, w0);
        prop_assert!((ker.alpha(-k) - ker.alpha(k).conj()).norm() <= 1e-15 * ker.alpha(0).norm());
        prop_assert!(ker.alpha(0).im.abs() <= 1e-15 * ker.alpha(0).norm());
    }

    #[test]
    fn approximations_scale_linearly(lambda in 0.1..10.0f64, w0 in -2.0..2.0f64, order in 0usize..2) {
        let grid = TimeGrid::new(0.02, 100).unwrap();
        let ker = BathKernel::exponential(grid, 1.0, 0.3, 1.5, w0);
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(-0.5, 0.0), C64::new(0.5, 0.0), C64::new(1.3, 0.0)]));
        let l = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64 * 0.1, i as f64 - j as f64));
        let base = weak_coupling_obar(&h, &l, &ker, &grid, 1.0).unwrap();
        let scaled = weak_coupling_obar(&h, &l, &ker.scaled(lambda), &grid, 1.0).unwrap();
        for i in [0, 37, 100] {
            prop_assert!(max_abs(&(scaled.obar.get(i) - base.obar.get(i) * C64::from(lambda))) <= 1e-12 * lambda * (1.0 + max_abs(base.obar.get(i))));
        }
        let pm = post_markov_obar(&h, &l, &ker, &grid, 1.0, order).unwrap();
        prop_assert_eq!(max_abs(pm.obar.get(0)), 0.0);
        prop_assert_eq!(pm.a0.get(0).norm() + pm.a1.get(0).norm(), 0.0);
    }

    #[test]
    fn convolutionless_generator_preserves_trace_and_hermiticity(rho in density(4), l in matrix(4), o in matrix(4), h in hermitian(4)) {
        let grid = TimeGrid::new(0.01, 40).unwrap();
        let obar = OperatorSeries::constant(grid, o);
        let out = integrate_convolutionless_me(&h, &l, &obar, &rho, &grid, 1.0, 10).unwrap();
        for r in &out.states {
            prop_assert!((r.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
            prop_assert!(hermiticity_defect(r) < 1e-13);
        }
        prop_assert!(out.hermiticity_defect < 1e-13);
    }

    #[test]
    fn klmn_inversion_recombines(vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, complex(), complex()), 1..20)) {
        let w: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let x: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let y: Vec<C64> = vals.iter().map(|v| v.2).collect();
        let z: Vec<C64> = vals.iter().map(|v| v.3).collect();
        let t = klmn_tables(&w, &x, &y, &z).unwrap();
        for i in 0..w.len() {
            prop_assert!((t.k[i] + t.m[i] - w[i]).norm() < 1e-15);
            prop_assert!((t.l[i] + t.n[i] - x[i]).norm() < 1e-15);
            prop_assert!((t.k[i] - t.m[i] - y[i]).norm() < 1e-15);
            prop_assert!((t.n[i] - t.l[i] - z[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(a in density(3), b in density(3), c in density(3)) {
        let (ab, bc, ac) = (trace_distance_matrix(&a, &b), trace_distance_matrix(&b, &c), trace_distance_matrix(&a, &c));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - trace_distance_matrix(&b, &a)).abs() < 1e-14);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(trace_distance_matrix(&a, &a) < 1e-14);
    }

    #[test]
    fn partial_trace_is_a_density_matrix(v in prop::collection::vec(complex(), 24), sys in prop::sample::select(vec![2usize, 3, 4, 6])) {
        let psi = CVector::from_vec(v);
        prop_assume!(psi.norm() > 1e-3);
        let psi = &psi / C64::from(psi.norm());
        let rho = reduced_density(&psi, sys);
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert_eq!(hermiticity_defect(&rho), 0.0);
        prop_assert!(hermitian_eigenvalues(&rho)[0] > -1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..40)) {
        let mut t = Table::new(["t", "v"]);
        for (i, v) in vals.iter().enumerate() {
            t.push(vec![i as f64, *v]);
        }
        let mut buf = Vec::new();
        t.write(&mut buf, &[]).unwrap();
        let (back, _) = Table::read(buf.as_slice()).unwrap();
        prop_assert_eq!(back.rows, t.rows);
    }
}
