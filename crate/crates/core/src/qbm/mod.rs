//! Quantum Brownian motion: coefficient tables of the convolutionless
//! stochastic Schrödinger equation and of the exact master equation.

mod me;
mod sse;

pub use me::{drift_closed_form, klmn_tables, me_coefficients, me_coefficients_with, wxyz_closed_form, Klmn, MeOptions, QbmMeCoeffs, Wxyz};
pub use sse::{evolve_sse_coeffs, QbmSseCoeffs, INSTABILITY_BOUND};
