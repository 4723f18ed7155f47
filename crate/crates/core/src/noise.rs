//! Colored complex Gaussian noise with `M{z_t z_s^*} = alpha(t - s)` and `M{z_t z_s} = 0`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{BathKernel, DiscreteBath, EPS_PSD};
use crate::linalg::{hermitian_eigen, CMatrix, C64};

/// Generator for trajectory `index` of a run seeded with `seed`.
///
/// Each trajectory owns its own ChaCha stream, so paths do not depend on the
/// order or thread in which they are drawn.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard circular complex Gaussian, `M{|xi|^2} = 1`, `M{xi^2} = 0`.
pub fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One realization of the conjugate process `z*_t` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub z_star: Vec<C64>,
    pub seed: u64,
    pub trajectory_index: u64,
    grid: TimeGrid,
}

impl NoisePath {
    pub fn new(grid: TimeGrid, z_star: Vec<C64>, seed: u64, trajectory_index: u64) -> Result<Self> {
        if z_star.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: z_star.len() });
        }
        Ok(Self { z_star, seed, trajectory_index, grid })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self { z_star: vec![C64::new(0.0, 0.0); grid.len()], seed: 0, trajectory_index: 0, grid }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `z_t` at grid point `i`.
    pub fn z(&self, i: usize) -> C64 {
        self.z_star[i].conj()
    }
}

/// Anything that can produce the path of a given trajectory index.
pub trait NoiseSource: Sync {
    fn grid(&self) -> &TimeGrid;
    fn path(&self, seed: u64, index: u64) -> NoisePath;
}

fn check_grid(kernel: &BathKernel, grid: &TimeGrid) -> Result<()> {
    let kg = kernel.grid();
    if (kg.dt() - grid.dt()).abs() > 1e-12 * grid.dt() || kg.n_steps() < grid.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "kernel grid (dt = {}, n = {}) does not cover the sampling grid (dt = {}, n = {})",
            kg.dt(),
            kg.n_steps(),
            grid.dt(),
            grid.n_steps()
        )));
    }
    Ok(())
}

/// Sampler built from the eigendecomposition of the grid covariance `C_ij = alpha(t_i - t_j)`.
#[derive(Debug, Clone)]
pub struct CovarianceSampler {
    grid: TimeGrid,
    /// `A` with `A A^dagger = C`, restricted to the retained eigenvectors.
    factor: CMatrix,
}

impl CovarianceSampler {
    pub fn new(kernel: &BathKernel, grid: &TimeGrid) -> Result<Self> {
        check_grid(kernel, grid)?;
        let c = kernel.covariance_matrix(grid.len());
        let (values, vectors) = hermitian_eigen(&c);
        let max = values.last().copied().unwrap_or(0.0).max(0.0);
        let min = values[0];
        if min < -EPS_PSD * max {
            return Err(Error::KernelNotPsd { min_eigenvalue: min, max_eigenvalue: max });
        }
        let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 0.0).collect();
        let mut factor = CMatrix::zeros(grid.len(), keep.len());
        for (col, &k) in keep.iter().enumerate() {
            let s = values[k].sqrt();
            for row in 0..grid.len() {
                factor[(row, col)] = vectors[(row, k)] * s;
            }
        }
        Ok(Self { grid: *grid, factor })
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }
}

impl NoiseSource for CovarianceSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn path(&self, seed: u64, index: u64) -> NoisePath {
        let mut rng = trajectory_rng(seed, index);
        let xi = nalgebra::DVector::from_fn(self.rank(), |_, _| circular_normal(&mut rng));
        let z = &self.factor * xi;
        NoisePath { z_star: z.iter().map(|v| v.conj()).collect(), seed, trajectory_index: index, grid: self.grid }
    }
}

/// Sampler summing independently driven bath modes:
/// `z_t = sum g [sqrt(n + 1) xi e^{-i w t} + sqrt(n) zeta e^{i w t}]`.
#[derive(Debug, Clone)]
pub struct ModeSumSampler {
    grid: TimeGrid,
    bath: DiscreteBath,
}

impl ModeSumSampler {
    pub fn new(bath: &DiscreteBath, grid: &TimeGrid) -> Result<Self> {
        if bath.is_empty() {
            return Err(Error::InvalidParameter("bath has no modes".into()));
        }
        Ok(Self { grid: *grid, bath: bath.clone() })
    }
}

impl NoiseSource for ModeSumSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn path(&self, seed: u64, index: u64) -> NoisePath {
        let mut rng = trajectory_rng(seed, index);
        let mut z = vec![C64::new(0.0, 0.0); self.grid.len()];
        for m in self.bath.modes() {
            let xi = circular_normal(&mut rng);
            let zeta = circular_normal(&mut rng);
            let down = m.g * xi * (m.nbar + 1.0).sqrt();
            let up = m.g * zeta * m.nbar.sqrt();
            let step = C64::from_polar(1.0, -m.omega * self.grid.dt());
            let mut phase = C64::new(1.0, 0.0);
            for (k, zk) in z.iter_mut().enumerate() {
                if k % 64 == 0 {
                    phase = C64::from_polar(1.0, -m.omega * self.grid.t(k));
                }
                *zk += down * phase + up * phase.conj();
                phase *= step;
            }
        }
        NoisePath { z_star: z.iter().map(|v| v.conj()).collect(), seed, trajectory_index: index, grid: self.grid }
    }
}

/// Draw trajectories `0..n_samples` from any source, in index order.
pub fn sample_paths(source: &dyn NoiseSource, n_samples: usize, seed: u64) -> Vec<NoisePath> {
    (0..n_samples as u64).into_par_iter().map(|i| source.path(seed, i)).collect()
}

pub fn sample_covariance_factorization(
    kernel: &BathKernel,
    grid: &TimeGrid,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<NoisePath>> {
    let sampler = CovarianceSampler::new(kernel, grid)?;
    Ok(sample_paths(&sampler, n_samples, seed))
}

pub fn sample_mode_sum(bath: &DiscreteBath, grid: &TimeGrid, n_samples: usize, seed: u64) -> Result<Vec<NoisePath>> {
    let sampler = ModeSumSampler::new(bath, grid)?;
    Ok(sample_paths(&sampler, n_samples, seed))
}

/// Empirical second moments of a path ensemble.
#[derive(Debug, Clone)]
pub struct NoiseStatistics {
    /// `(1/N) sum z_i z_j^*`.
    pub empirical_covariance: CMatrix,
    /// `(1/N) sum z_i z_j`.
    pub empirical_pseudo: CMatrix,
    pub n_samples: usize,
}

impl NoiseStatistics {
    /// `max |C_hat - C|` against the kernel on the same grid.
    pub fn covariance_error(&self, kernel: &BathKernel) -> f64 {
        let c = kernel.covariance_matrix(self.empirical_covariance.nrows());
        (&self.empirical_covariance - c).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_pseudo(&self) -> f64 {
        self.empirical_pseudo.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

pub fn estimate_statistics(paths: &[NoisePath]) -> Result<NoiseStatistics> {
    if paths.len() < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let n = paths[0].z_star.len();
    if let Some(p) = paths.iter().find(|p| p.z_star.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: p.z_star.len() });
    }
    const CHUNK: usize = 512;
    let mut cov = CMatrix::zeros(n, n);
    let mut pseudo = CMatrix::zeros(n, n);
    for chunk in paths.chunks(CHUNK) {
        let z = DMatrix::from_fn(n, chunk.len(), |i, k| chunk[k].z(i));
        cov += &z * z.adjoint();
        pseudo += &z * z.transpose();
    }
    let inv = 1.0 / paths.len() as f64;
    cov *= C64::from(inv);
    pseudo *= C64::from(inv);
    // Hermitian by construction; remove round-off asymmetry from the blocked products.
    crate::linalg::symmetrize(&mut cov);
    Ok(NoiseStatistics { empirical_covariance: cov, empirical_pseudo: pseudo, n_samples: paths.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Units;
    use crate::kernels::{discretize_bath, kernel_from_bath, make_kernel, BathMode, DiscretizationScheme, SpectralDensity};

    #[test]
    fn zero_kernel_gives_zero_paths() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let paths = sample_covariance_factorization(&BathKernel::zero(grid, 1.0), &grid, 4, 1).unwrap();
        assert!(paths.iter().all(|p| p.z_star.iter().all(|z| z.norm() == 0.0)));
        let bath = DiscreteBath::zero_temperature(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let paths = sample_mode_sum(&bath, &grid, 4, 1).unwrap();
        assert!(paths.iter().all(|p| p.z_star.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn two_point_estimator_arithmetic() {
        let grid = TimeGrid::new(0.1, 2).unwrap();
        let mk = |z: C64| NoisePath::new(grid, vec![z.conj(); 3], 0, 0).unwrap();
        let stats = estimate_statistics(&[mk(C64::new(1.0, 0.0)), mk(C64::new(0.0, 1.0))]).unwrap();
        assert!((stats.empirical_covariance[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(stats.empirical_pseudo[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn paths_are_reproducible_and_order_independent() {
        let grid = TimeGrid::new(0.05, 40).unwrap();
        let j = SpectralDensity::ohmic_exponential(0.1, 5.0, 1.0).unwrap();
        let k = make_kernel(&j, 0.0, &grid, Units::default()).unwrap();
        let s = CovarianceSampler::new(&k, &grid).unwrap();
        let all = sample_paths(&s, 8, 42);
        assert_eq!(all[5], s.path(42, 5));
        assert_ne!(all[5], s.path(43, 5));
        assert_ne!(all[4].z_star, all[5].z_star);
    }

    #[test]
    fn single_mode_covariance_converges() {
        let grid = TimeGrid::new(0.2, 10).unwrap();
        let bath = DiscreteBath::from_modes(vec![BathMode { g: C64::new(0.6, 0.0), omega: 1.5, nbar: 0.3 }]).unwrap();
        let n = 20000;
        let stats = estimate_statistics(&sample_mode_sum(&bath, &grid, n, 9).unwrap()).unwrap();
        let k = kernel_from_bath(&bath, &grid, 1.0);
        let band = 5.0 * k.alpha(0).re / (n as f64).sqrt();
        assert!(stats.covariance_error(&k) < band);
        assert!(stats.max_pseudo() < band);
    }

    #[test]
    fn factorization_rejects_indefinite_kernel() {
        let grid = TimeGrid::new(0.1, 20).unwrap();
        // A real "kernel" whose Fourier transform changes sign.
        let k = BathKernel::from_fn(grid, 1.0, |t| C64::new(if t < 0.25 { 1.0 } else { -1.0 }, 0.0));
        assert!(matches!(CovarianceSampler::new(&k, &grid), Err(Error::KernelNotPsd { .. })));
    }

    #[test]
    fn samplers_agree_for_discretized_kernel() {
        let grid = TimeGrid::new(0.1, 30).unwrap();
        let j = SpectralDensity::ohmic_exponential(0.1, 5.0, 1.0).unwrap();
        let bath = discretize_bath(&j, 0.5, Units::default(), 50, 30.0, DiscretizationScheme::GaussLegendre).unwrap();
        let k = kernel_from_bath(&bath, &grid, 1.0);
        let n = 10000;
        let a = estimate_statistics(&sample_mode_sum(&bath, &grid, n, 3).unwrap()).unwrap();
        let b = estimate_statistics(&sample_covariance_factorization(&k, &grid, n, 4).unwrap()).unwrap();
        let band = 5.0 * k.alpha(0).re / (n as f64).sqrt();
        assert!(a.covariance_error(&k) < band);
        assert!(b.covariance_error(&k) < band);
        let diff = (&a.empirical_covariance - &b.empirical_covariance).iter().fold(0.0, |m: f64, v| m.max(v.norm()));
        assert!(diff < 2.0 * band);
    }
}
