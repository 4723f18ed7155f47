//! Convolutionless non-Markovian quantum state diffusion for linear baths.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approx;
pub mod error;
pub mod export;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod master;
pub mod memory;
pub mod noise;
pub mod oracle;
pub mod qbm;
pub mod quadrature;
pub mod system;
pub mod trajectories;

pub use approx::{alpha_moments, post_markov_obar, weak_coupling_obar, ApproxObar, ApproxScheme};
pub use error::{Error, Result};
pub use grid::{OperatorSeries, Series, TimeGrid, Units};
pub use kernels::{
    classical_damping_kernel, discretize_bath, kernel_from_bath, make_kernel, BathKernel, BathMode, DiscreteBath,
    DiscretizationScheme, SpectralDensity, SpectralShape,
};
pub use linalg::{CMatrix, CVector, C64};
pub use memory::{solve_amplitude, solve_classical_motion, AmplitudeResponse, ClassicalSolution};
pub use qbm::{
    drift_closed_form, evolve_sse_coeffs, klmn_tables, me_coefficients, wxyz_closed_form, QbmMeCoeffs, QbmSseCoeffs,
};
pub use master::{
    integrate_convolutionless_me, integrate_lindblad, integrate_qbm_me, integrate_rwa_exact, observables,
    trace_distance, DensitySeries, ObservableRow,
};
pub use oracle::{build_full_model, propagate_full, reduced_density, run_oracle, CouplingKind, FullModel, OracleRun, TotalState};
pub use system::{build_system, SystemKind, SystemModel};
pub use trajectories::{
    ensemble_density, integrate_convolutionless, integrate_markov_qsd, integrate_qbm_sse, run_ensemble,
    EnsembleResult, Normalization, TrajectoryRecord,
};
pub use noise::{
    estimate_statistics, sample_covariance_factorization, sample_mode_sum, CovarianceSampler, ModeSumSampler,
    NoisePath, NoiseSource, NoiseStatistics,
};
