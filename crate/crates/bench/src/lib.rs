//! Shared fixtures for the benchmarks.

use nmqsd::{discretize_bath, DiscreteBath, DiscretizationScheme, SpectralDensity, Units};

/// The weakly coupled four-mode Ohmic bath used across the QBM benches.
pub fn four_mode_bath() -> DiscreteBath {
    let j = SpectralDensity::ohmic_exponential(0.02, 5.0, 1.0).expect("valid density");
    discretize_bath(&j, 0.0, Units::default(), 4, 6.0, DiscretizationScheme::UniformMidpoint)
        .expect("valid bath")
        .with_mass(1.0)
}
