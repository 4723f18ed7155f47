//! Turning a validated configuration into core objects.

use nmqsd::kernels::bose_occupation;
use nmqsd::noise::NoiseSource;
use nmqsd::{
    build_system, discretize_bath, kernel_from_bath, make_kernel, BathKernel, BathMode, CMatrix, CVector, CovarianceSampler,
    DiscreteBath, DiscretizationScheme, ModeSumSampler, SpectralDensity, SpectralShape, SystemKind, SystemModel, TimeGrid,
    Units, C64,
};

use crate::config::{Coupling, Discretization, ExperimentConfig, InitialState, ModelKind, Sampler, Shape};
use crate::error::{CliError, CliResult};

pub struct Setup {
    pub system: SystemModel,
    /// Coupling operator `L`.
    pub l: CMatrix,
    pub psi0: CVector,
    pub grid: TimeGrid,
    pub kernel: BathKernel,
    /// Present for explicit or discretized baths.
    pub bath: Option<DiscreteBath>,
    pub units: Units,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> CliResult<Self> {
        let m = &cfg.model;
        let units = Units { hbar: m.hbar, k_b: m.k_b };
        let kind = match m.kind {
            ModelKind::Oscillator => SystemKind::Oscillator,
            ModelKind::TwoLevel => SystemKind::TwoLevel,
        };
        let system = build_system(m.omega, m.mass, m.hbar, m.fock_dim, kind)?;
        let l = match m.coupling {
            Coupling::Position => system.position_coupling()?,
            Coupling::RotatingWave => system.a.clone(),
        };
        let psi0 = match &m.initial {
            InitialState::Coherent([re, im]) => {
                if kind != SystemKind::Oscillator {
                    return Err(CliError::Validation("coherent initial states need an oscillator".into()));
                }
                let v = system.coherent_state(C64::new(*re, *im));
                &v / C64::from(v.norm())
            }
            InitialState::Basis(n) if *n < system.dim => system.basis_state(*n),
            InitialState::Basis(n) => {
                return Err(CliError::Validation(format!("initial basis state {n} outside dimension {}", system.dim)))
            }
        };
        let grid = TimeGrid::covering(cfg.grid.dt, cfg.grid.t_max)?;

        let b = &cfg.bath;
        let t = b.temperature;
        let (kernel, bath) = if let Some(exp) = &b.exponential {
            (BathKernel::exponential(grid, m.hbar, exp.gamma, exp.kappa, exp.w0), None)
        } else if let Some(modes) = &b.modes {
            let modes = modes
                .iter()
                .map(|e| BathMode { g: C64::new(e.g, 0.0), omega: e.omega, nbar: bose_occupation(e.omega, t, units) })
                .collect();
            let bath = DiscreteBath::from_modes(modes)?.with_mass(m.mass);
            (kernel_from_bath(&bath, &grid, m.hbar), Some(bath))
        } else {
            let s = b.spectral.as_ref().expect("validated");
            let shape = match s.shape {
                Shape::OhmicExponential => SpectralShape::OhmicExponential,
                Shape::OhmicLorentzian => SpectralShape::OhmicLorentzian,
            };
            let j = SpectralDensity::new(shape, s.gamma, s.cutoff, m.mass)?;
            match &b.discretize {
                Some(d) => {
                    let scheme = match d.scheme {
                        Discretization::UniformMidpoint => DiscretizationScheme::UniformMidpoint,
                        Discretization::GaussLegendre => DiscretizationScheme::GaussLegendre,
                    };
                    let bath = discretize_bath(&j, t, units, d.n_modes, d.omega_max, scheme)?.with_mass(m.mass);
                    if bath.coverage_warning {
                        eprintln!("warning: discretized bath captures less than 99% of the spectral weight");
                    }
                    (kernel_from_bath(&bath, &grid, m.hbar), Some(bath))
                }
                None => (make_kernel(&j, t, &grid, units)?, None),
            }
        };
        Ok(Self { system, l, psi0, grid, kernel, bath, units })
    }

    pub fn rho0(&self) -> CMatrix {
        &self.psi0 * self.psi0.adjoint()
    }

    /// Colored-noise source: mode sums by default when the bath is discrete.
    pub fn noise_source(&self, choice: Option<Sampler>) -> CliResult<Box<dyn NoiseSource>> {
        match (choice, &self.bath) {
            (Some(Sampler::ModeSum), None) => Err(CliError::Validation("mode-sum sampling needs a discrete bath".into())),
            (Some(Sampler::ModeSum) | None, Some(bath)) => Ok(Box::new(ModeSumSampler::new(bath, &self.grid)?)),
            _ => Ok(Box::new(CovarianceSampler::new(&self.kernel, &self.grid)?)),
        }
    }
}
