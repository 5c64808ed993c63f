//! Row-major dense matrices sized for state dimensions in the tens to
//! low hundreds, plus a positive-semidefinite wrapper that owns a
//! Cholesky factor obtained under an escalating jitter schedule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Builds a matrix from row-major data; every entry must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "Mat::new: {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        crate::numerics::check_finite(&data, "Mat::new data")?;
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Diagonal matrix from a slice.
    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = d[i];
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = crate::numerics::dot(self.row(i), x);
        }
        out
    }

    /// `selfᵀ * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            crate::numerics::axpy(x[i], self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Adds `s` to each diagonal entry in place.
    pub fn add_diag(&mut self, s: f64) {
        assert!(self.is_square());
        for i in 0..self.rows {
            self.data[i * self.cols + i] += s;
        }
    }

    /// Replaces `self` by `(self + selfᵀ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, m);
                self.set(j, i, m);
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::numerics::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest |a_ij − a_ji|; zero for an exactly symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Rank-one update `self += s · u vᵀ`.
    pub fn add_outer(&mut self, s: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            let su = s * u[i];
            if su == 0.0 {
                continue;
            }
            crate::numerics::axpy(su, v, &mut self.data[i * self.cols..(i + 1) * self.cols]);
        }
    }
}

/// Jitter levels tried in order when a Cholesky factorisation fails.
pub const JITTER_SCHEDULE: [f64; 8] = [0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// Symmetric positive-(semi)definite matrix with a cached lower Cholesky
/// factor of `m + jitter·I`, where `jitter` is the smallest level in
/// [`JITTER_SCHEDULE`] at which factorisation succeeds.
#[derive(Debug, Clone)]
pub struct PsdMat {
    mat: Mat,
    factor: Mat,
    jitter: f64,
}

impl PsdMat {
    /// Factorises `m`, escalating through the jitter schedule on failure.
    ///
    /// `m` must be square and symmetric to an absolute tolerance of 1e-8
    /// (scaled by the largest entry magnitude).
    pub fn cholesky(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!("cholesky of non-square {}x{}", m.rows, m.cols)));
        }
        let tol = 1e-8 * m.max_abs().max(1.0);
        if m.asymmetry() > tol {
            return Err(Error::domain(format!(
                "cholesky: matrix asymmetry {:.3e} exceeds tolerance {:.3e}",
                m.asymmetry(),
                tol
            )));
        }
        for &jitter in JITTER_SCHEDULE.iter() {
            if let Some(factor) = try_cholesky(&m, jitter) {
                return Ok(PsdMat { mat: m, factor, jitter });
            }
        }
        Err(Error::NotPositiveDefinite {
            context: format!("{}x{} matrix, max |entry| {:.3e}", m.rows, m.cols, m.max_abs()),
            max_jitter: *JITTER_SCHEDULE.last().unwrap(),
        })
    }

    /// Convenience: isotropic `s·I` (s > 0 required).
    pub fn isotropic(dim: usize, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("isotropic covariance scale {s}")));
        }
        let mat = Mat::scaled_identity(dim, s);
        let factor = Mat::scaled_identity(dim, s.sqrt());
        Ok(PsdMat { mat, factor, jitter: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// The original (un-jittered) matrix.
    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    /// Lower-triangular factor L with L Lᵀ = mat + jitter·I.
    pub fn factor(&self) -> &Mat {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// log det(mat + jitter·I) = 2 Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| self.factor.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Solves `L z = b` (forward substitution).
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.factor.get(i, j) * z[j];
            }
            z[i] = s / self.factor.get(i, i);
        }
        z
    }

    /// Solves `Lᵀ z = b` (back substitution).
    pub fn solve_lower_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= self.factor.get(j, i) * z[j];
            }
            z[i] = s / self.factor.get(i, i);
        }
        z
    }

    /// Solves `(mat + jitter·I) z = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.solve_lower(b);
        self.solve_lower_t(&y)
    }

    /// `bᵀ (mat + jitter·I)⁻¹ b = ‖L⁻¹ b‖²`.
    pub fn inv_quad(&self, b: &[f64]) -> f64 {
        let z = self.solve_lower(b);
        crate::numerics::dot(&z, &z)
    }

    /// `L ε`: maps standard-normal noise to noise with this covariance.
    pub fn correlate(&self, eps: &[f64]) -> Vec<f64> {
        self.factor.matvec(eps)
    }
}

fn try_cholesky(m: &Mat, jitter: f64) -> Option<Mat> {
    let n = m.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reconstruction_rel_err(p: &PsdMat) -> f64 {
        let l = p.factor();
        let llt = l.matmul(&l.transpose());
        let mut target = p.mat().clone();
        target.add_diag(p.jitter());
        llt.sub(&target).frobenius_norm() / target.frobenius_norm().max(1e-300)
    }

    #[test]
    fn cholesky_of_spd_matrix_uses_zero_jitter() {
        // 2x2 SPD with known factor: [[4,2],[2,3]] = L Lᵀ, L = [[2,0],[1,√2]].
        let m = Mat::new(2, 2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let p = PsdMat::cholesky(m).unwrap();
        assert_eq!(p.jitter(), 0.0);
        assert_relative_eq!(p.factor().get(0, 0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.factor().get(1, 0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.factor().get(1, 1), 2.0f64.sqrt(), max_relative = 1e-15);
        assert!(reconstruction_rel_err(&p) <= 1e-10);
        assert_relative_eq!(p.log_det(), 8.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn cholesky_escalates_jitter_for_singular_matrix() {
        // Rank-one 2x2: needs some jitter, and the reported level must be
        // the smallest that succeeds.
        let m = Mat::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let p = PsdMat::cholesky(m).unwrap();
        assert!(p.jitter() > 0.0);
        assert!(JITTER_SCHEDULE.contains(&p.jitter()));
        assert!(reconstruction_rel_err(&p) <= 1e-10);
        let idx = JITTER_SCHEDULE.iter().position(|&j| j == p.jitter()).unwrap();
        if idx > 0 {
            assert!(try_cholesky(p.mat(), JITTER_SCHEDULE[idx - 1]).is_none());
        }
    }

    #[test]
    fn cholesky_rejects_asymmetric_and_indefinite() {
        let m = Mat::new(2, 2, vec![1.0, 0.5, 0.2, 1.0]).unwrap();
        assert!(PsdMat::cholesky(m).is_err());

        let m = Mat::new(2, 2, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
        match PsdMat::cholesky(m) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn solve_and_inv_quad_agree_with_direct_inverse() {
        let m = Mat::new(3, 3, vec![4.0, 1.0, 0.2, 1.0, 3.0, 0.5, 0.2, 0.5, 2.0]).unwrap();
        let p = PsdMat::cholesky(m.clone()).unwrap();
        let b = [1.0, -2.0, 0.5];
        let z = p.solve(&b);
        let back = m.matvec(&z);
        for (got, want) in back.iter().zip(&b) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
        let quad = p.inv_quad(&b);
        assert_relative_eq!(quad, crate::numerics::dot(&b, &z), max_relative = 1e-12);
    }

    #[test]
    fn correlate_reproduces_covariance_in_expectation_shape() {
        // L e_k is the k-th column of L; stack them to rebuild L.
        let m = Mat::new(2, 2, vec![2.0, 0.3, 0.3, 1.0]).unwrap();
        let p = PsdMat::cholesky(m).unwrap();
        let c0 = p.correlate(&[1.0, 0.0]);
        let c1 = p.correlate(&[0.0, 1.0]);
        assert_eq!(c0, vec![p.factor().get(0, 0), p.factor().get(1, 0)]);
        assert_eq!(c1, vec![0.0, p.factor().get(1, 1)]);
    }

    #[test]
    fn mat_rejects_bad_shapes_and_nonfinite() {
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Mat::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn matvec_matmul_transpose_basics() {
        let a = Mat::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(a.matvec_t(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
        let at = a.transpose();
        let prod = a.matmul(&at);
        assert_eq!(prod.rows(), 2);
        assert_eq!(prod.get(0, 0), 14.0);
        assert_eq!(prod.get(0, 1), 32.0);
        assert_eq!(prod.get(1, 1), 77.0);
        assert_eq!(prod.asymmetry(), 0.0);
    }
}
