//! System Hilbert spaces: the truncated harmonic oscillator and the two-level system.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Oscillator,
    TwoLevel,
}

/// Operators of the system in its energy basis.
///
/// For the oscillator, `H = hbar Omega (n + 1/2)` is kept diagonal so the
/// spectrum is exact; `p^2 / 2M + M Omega^2 q^2 / 2` agrees with it except in
/// the last Fock state, where the truncated ladder differs.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub kind: SystemKind,
    pub omega: f64,
    pub mass: f64,
    pub hbar: f64,
    pub dim: usize,
    pub h: CMatrix,
    /// Annihilation operator, or `sigma_-` for the two-level system.
    pub a: CMatrix,
    pub q: Option<CMatrix>,
    pub p: Option<CMatrix>,
    pub sigma_z: Option<CMatrix>,
}

pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn build_system(omega: f64, mass: f64, hbar: f64, fock_dim: usize, kind: SystemKind) -> Result<SystemModel> {
    if !(omega > 0.0) || !(mass > 0.0) || !(hbar > 0.0) {
        return Err(Error::InvalidParameter("omega, mass and hbar must be positive".into()));
    }
    match kind {
        SystemKind::Oscillator => {
            if fock_dim < 4 {
                return Err(Error::InvalidParameter(format!("fock_dim must be >= 4, got {fock_dim}")));
            }
            let a = annihilation(fock_dim);
            let ad = a.adjoint();
            let xq = (hbar / (2.0 * mass * omega)).sqrt();
            let xp = (hbar * mass * omega / 2.0).sqrt();
            let q = (&a + &ad) * C64::from(xq);
            let p = (&ad - &a) * (I * xp);
            let h = CMatrix::from_fn(fock_dim, fock_dim, |i, j| {
                if i == j {
                    C64::new(hbar * omega * (i as f64 + 0.5), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            Ok(SystemModel { kind, omega, mass, hbar, dim: fock_dim, h, a, q: Some(q), p: Some(p), sigma_z: None })
        }
        SystemKind::TwoLevel => {
            // Basis (ground, excited).
            let sz = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]));
            let h = &sz * C64::from(0.5 * hbar * omega);
            let a = annihilation(2);
            Ok(SystemModel { kind, omega, mass, hbar, dim: 2, h, a, q: None, p: None, sigma_z: Some(sz) })
        }
    }
}

impl SystemModel {
    pub fn q(&self) -> Result<&CMatrix> {
        self.q.as_ref().ok_or_else(|| Error::InvalidParameter("two-level system has no position operator".into()))
    }

    pub fn p(&self) -> Result<&CMatrix> {
        self.p.as_ref().ok_or_else(|| Error::InvalidParameter("two-level system has no momentum operator".into()))
    }

    /// Coupling operator of quantum Brownian motion, `L = q / hbar`.
    pub fn position_coupling(&self) -> Result<CMatrix> {
        Ok(self.q()? * C64::from(1.0 / self.hbar))
    }

    pub fn number(&self) -> CMatrix {
        self.a.adjoint() * &self.a
    }

    /// Coherent state `|beta>` truncated to the basis and renormalized.
    pub fn coherent_state(&self, beta: C64) -> CVector {
        coherent_state(self.dim, beta)
    }

    pub fn basis_state(&self, n: usize) -> CVector {
        let mut v = CVector::zeros(self.dim);
        v[n] = C64::new(1.0, 0.0);
        v
    }

    /// Population of the two highest basis states relative to the norm.
    pub fn tail_population(&self, psi: &CVector) -> f64 {
        if self.kind == SystemKind::TwoLevel || self.dim < 3 {
            return 0.0;
        }
        let norm = psi.norm_squared();
        if norm == 0.0 {
            return 0.0;
        }
        (psi[self.dim - 1].norm_sqr() + psi[self.dim - 2].norm_sqr()) / norm
    }

    /// `max |[q, p] - i hbar|` over the first `dim - 2` diagonal block.
    pub fn ccr_defect(&self) -> Result<f64> {
        let (q, p) = (self.q()?, self.p()?);
        let c = q * p - p * q;
        let n = self.dim - 2;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { I * self.hbar } else { C64::new(0.0, 0.0) };
                worst = worst.max((c[(i, j)] - target).norm());
            }
        }
        Ok(worst)
    }
}

pub fn coherent_state(dim: usize, beta: C64) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut term = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        v[n] = term;
        term *= beta / ((n + 1) as f64).sqrt();
    }
    let norm = v.norm();
    v / C64::from(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_trace_and_ccr() {
        let s = build_system(1.0, 1.0, 1.0, 10, SystemKind::Oscillator).unwrap();
        assert!((s.h.trace().re - 50.0).abs() < 1e-12);
        assert!(s.ccr_defect().unwrap() <= 1e-12);
        let s = build_system(1.7, 0.4, 0.6, 12, SystemKind::Oscillator).unwrap();
        assert!(s.ccr_defect().unwrap() <= 1e-12);
        let q = s.q().unwrap();
        assert!(crate::linalg::hermiticity_defect(q) == 0.0);
        assert!(crate::linalg::hermiticity_defect(s.p().unwrap()) == 0.0);
    }

    #[test]
    fn two_level_spectrum() {
        let s = build_system(2.0, 1.0, 1.0, 2, SystemKind::TwoLevel).unwrap();
        let ev = crate::linalg::hermitian_eigenvalues(&s.h);
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        assert!(s.q().is_err());
    }

    #[test]
    fn rejects_small_truncation() {
        assert!(build_system(1.0, 1.0, 1.0, 3, SystemKind::Oscillator).is_err());
        assert!(build_system(1.0, 0.0, 1.0, 8, SystemKind::Oscillator).is_err());
    }

    #[test]
    fn coherent_state_moments() {
        let s = build_system(1.0, 1.0, 1.0, 30, SystemKind::Oscillator).unwrap();
        let beta = C64::new(0.8, -0.3);
        let psi = s.coherent_state(beta);
        let a_mean = psi.dotc(&(&s.a * &psi));
        assert!((a_mean - beta).norm() < 1e-12);
        assert!(s.tail_population(&psi) < 1e-20);
    }
}
