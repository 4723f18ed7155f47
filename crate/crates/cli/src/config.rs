//! Experiment configuration. Unknown keys anywhere are rejected.

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub bath: BathBlock,
    pub grid: GridBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Oscillator,
    TwoLevel,
}

/// `position`: `L = q / hbar` (quantum Brownian motion).
/// `rotating-wave`: `L = a` (or `sigma_-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Position,
    RotatingWave,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    #[serde(rename = "Omega", alias = "omega")]
    pub omega: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub k_b: f64,
    #[serde(default = "default_fock_dim")]
    pub fock_dim: usize,
    pub coupling: Coupling,
    #[serde(default)]
    pub initial: InitialState,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum InitialState {
    /// Coherent amplitude `[re, im]`.
    Coherent([f64; 2]),
    /// Fock or energy eigenstate index.
    Basis(usize),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Basis(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    OhmicExponential,
    OhmicLorentzian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBlock {
    pub shape: Shape,
    pub gamma: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    UniformMidpoint,
    GaussLegendre,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizeBlock {
    pub n_modes: usize,
    pub omega_max: f64,
    #[serde(default = "default_discretization")]
    pub scheme: Discretization,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub omega: f64,
    pub g: f64,
}

/// `alpha(tau) = (gamma kappa / 2) exp(-kappa |tau| - i w0 tau)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialBlock {
    pub gamma: f64,
    pub kappa: f64,
    #[serde(default)]
    pub w0: f64,
}

/// Exactly one of `spectral`, `modes`, `exponential` must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathBlock {
    #[serde(default)]
    pub temperature: f64,
    pub spectral: Option<SpectralBlock>,
    /// Replace the continuum by a finite set of modes.
    pub discretize: Option<DiscretizeBlock>,
    pub modes: Option<Vec<ModeEntry>>,
    pub exponential: Option<ExponentialBlock>,
    /// Fock dimension of every bath mode in the oracle.
    #[serde(default = "default_mode_dim")]
    pub oracle_mode_dim: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dt: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Markov,
    RwaExact,
    QbmSse,
    QbmMe,
    Redfield,
    PostMarkov,
    Oracle,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Covariance,
    ModeSum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub scheme: Scheme,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Defaults to one per available core.
    pub workers: Option<usize>,
    /// Noise source for colored-noise trajectories; mode sums need a discrete bath.
    pub sampler: Option<Sampler>,
    /// Lindblad rate for `markov`; defaults to `2 Re int_0^t_max alpha`.
    pub markov_rate: Option<f64>,
    /// Order of the `post-markov` expansion (0 or 1).
    #[serde(default)]
    pub post_markov_order: usize,
    /// Series compared pairwise by `compare`: `trajectories`, `master`,
    /// `oracle`, or a path to a density CSV.
    #[serde(default)]
    pub compare: Vec<String>,
    /// Scheme used by `trajectories` and `master` inside `compare`.
    pub compare_scheme: Option<Scheme>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dump {
    Observables,
    Density,
    Tracked,
    Kernel,
    Coefficients,
    Noise,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_dump")]
    pub dump: Vec<Dump>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: default_directory(), dump: default_dump() }
    }
}

fn one() -> f64 {
    1.0
}

fn default_fock_dim() -> usize {
    12
}

fn default_mode_dim() -> usize {
    5
}

fn default_discretization() -> Discretization {
    Discretization::UniformMidpoint
}

fn default_n_traj() -> usize {
    1000
}

fn default_stride() -> usize {
    1
}

fn default_directory() -> String {
    "out".into()
}

fn default_dump() -> Vec<Dump> {
    vec![Dump::Observables, Dump::Density, Dump::Tracked, Dump::Coefficients]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        let b = &self.bath;
        let sources = [b.spectral.is_some(), b.modes.is_some(), b.exponential.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err("bath: exactly one of `spectral`, `modes`, `exponential` is required".into());
        }
        if b.discretize.is_some() && b.spectral.is_none() {
            return Err("bath: `discretize` applies to a `spectral` bath only".into());
        }
        if !(b.temperature >= 0.0) {
            return Err(format!("bath: temperature must be >= 0, got {}", b.temperature));
        }
        if b.exponential.is_some() && b.temperature > 0.0 {
            return Err("bath: the exponential kernel is temperature independent; set temperature = 0".into());
        }
        if !(self.grid.dt > 0.0 && self.grid.t_max > 0.0) {
            return Err("grid: dt and t_max must be positive".into());
        }
        if self.run.stride == 0 || self.run.n_traj == 0 || self.run.workers == Some(0) {
            return Err("run: stride, n_traj and workers must be >= 1".into());
        }
        if self.run.post_markov_order > 1 {
            return Err("run: post_markov_order must be 0 or 1".into());
        }
        if self.model.coupling == Coupling::Position && self.model.kind != ModelKind::Oscillator {
            return Err("model: position coupling needs an oscillator".into());
        }
        if let Some(Scheme::Compare | Scheme::Oracle) = self.run.compare_scheme {
            return Err("run: compare_scheme must name a trajectory or master-equation scheme".into());
        }
        Ok(())
    }

    /// The bath is a finite set of modes (explicit or discretized).
    pub fn is_discrete(&self) -> bool {
        self.bath.modes.is_some() || self.bath.discretize.is_some()
    }
}
