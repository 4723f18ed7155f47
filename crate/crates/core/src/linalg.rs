//! Dense and sparse complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
/// A square complex matrix.
pub type CMatrix = DMatrix<C64>;
/// A complex column vector.
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replace `m` by `(m + m^dagger) / 2`.
pub fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let mut h = m.clone();
    symmetrize(&mut h);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut h = m.clone();
    symmetrize(&mut h);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// `|psi><psi|`.
pub fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Compressed sparse row matrix for the matrix-vector products of the hot loops.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &CMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    /// Build from unordered triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                rows.push(i);
                last = Some((i, j));
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((&i, &j), &v) in rows.iter().zip(&col_idx).zip(&values) {
            if v.re != 0.0 || v.im != 0.0 {
                row_ptr[i + 1] += 1;
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, col_idx: keep_cols, values: keep_vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A x`.
    pub fn mul_to(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y += s A x`.
    pub fn mul_add_to(&self, s: C64, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += s * acc;
        }
    }

    /// Gershgorin bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.nrows)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.values[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval `[lo, hi]` containing the spectrum of a Hermitian matrix.
    pub fn gershgorin_interval(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.nrows {
            let (mut d, mut r) = (0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d = self.values[k].re;
                } else {
                    r += self.values[k].norm();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }

    /// `<x| A |x>` for a Hermitian `A`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.nrows {
            let mut row = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * x[self.col_idx[k]];
            }
            acc += x[i].conj() * row;
        }
        acc
    }
}

/// Eigenbasis of a Hermitian Hamiltonian, used to integrate in the interaction picture.
///
/// When the Hamiltonian is already diagonal the basis change is skipped.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    energies: Vec<f64>,
    basis: Option<CMatrix>,
    hbar: f64,
}

impl EigenFrame {
    pub fn new(h: &CMatrix, hbar: f64) -> Self {
        if is_diagonal(h) {
            let energies = (0..h.nrows()).map(|i| h[(i, i)].re).collect();
            Self { energies, basis: None, hbar }
        } else {
            let (energies, v) = hermitian_eigen(h);
            Self { energies, basis: Some(v), hbar }
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Express an operator in the eigenbasis.
    pub fn op_into(&self, op: &CMatrix) -> CMatrix {
        match &self.basis {
            None => op.clone(),
            Some(v) => v.adjoint() * op * v,
        }
    }

    pub fn op_out(&self, op: &CMatrix) -> CMatrix {
        match &self.basis {
            None => op.clone(),
            Some(v) => v * op * v.adjoint(),
        }
    }

    pub fn vec_into(&self, psi: &CVector) -> CVector {
        match &self.basis {
            None => psi.clone(),
            Some(v) => v.adjoint() * psi,
        }
    }

    pub fn vec_out(&self, psi: &CVector) -> CVector {
        match &self.basis {
            None => psi.clone(),
            Some(v) => v * psi,
        }
    }

    /// Phases `exp(-i E_j t / hbar)` of the free evolution.
    pub fn phases(&self, t: f64) -> Vec<C64> {
        self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t / self.hbar)).collect()
    }
}

/// `(U rho U^dagger)_{jk} = p_j p_k^* rho_{jk}` for diagonal `U = diag(p)`.
pub fn rotate(rho: &CMatrix, phases: &[C64]) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |j, k| phases[j] * phases[k].conj() * rho[(j, k)])
}

/// Inverse of [`rotate`].
pub fn unrotate(rho: &CMatrix, phases: &[C64]) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |j, k| phases[j].conj() * phases[k] * rho[(j, k)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matches_dense() {
        let m = CMatrix::from_fn(5, 5, |i, j| if (i + 2 * j) % 3 == 0 { c(i as f64, j as f64 - 1.0) } else { c(0.0, 0.0) });
        let csr = CsrMatrix::from_dense(&m);
        let x: Vec<C64> = (0..5).map(|k| c(k as f64 * 0.5, 1.0 - k as f64)).collect();
        let mut y = vec![C64::new(0.0, 0.0); 5];
        csr.mul_to(&x, &mut y);
        let yd = &m * CVector::from_vec(x.clone());
        for k in 0..5 {
            assert!((y[k] - yd[k]).norm() < 1e-14);
        }
        assert_eq!(csr.to_dense(), m);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let t = vec![(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 0, c(0.5, 0.0))];
        let csr = CsrMatrix::from_triplets(2, 2, t);
        assert_eq!(csr.nnz(), 1);
        assert_eq!(csr.to_dense()[(1, 0)], c(2.5, 0.0));
    }

    #[test]
    fn trace_norm_of_pure_state_difference() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)]));
        assert!((trace_norm(&(a - b)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_frame_round_trip() {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.3), c(0.0, -0.3), c(-1.0, 0.0)]);
        let frame = EigenFrame::new(&h, 1.0);
        let d = frame.op_into(&h);
        assert!((d[(0, 1)]).norm() < 1e-12);
        assert!((frame.op_out(&d) - &h).norm() < 1e-12);
    }
}
