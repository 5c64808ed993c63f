//! Covariance kernels for the GP dynamics module.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::linalg::Mat;

/// Squared-exponential kernel
/// `k(a, b) = variance · exp(−‖a − b‖² / (2 ℓ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquaredExpKernel {
    pub lengthscale: f64,
    pub variance: f64,
}

impl SquaredExpKernel {
    pub fn new(lengthscale: f64, variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::domain(format!("kernel lengthscale {lengthscale}")));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::domain(format!("kernel variance {variance}")));
        }
        Ok(SquaredExpKernel { lengthscale, variance })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    /// Gram matrix over `n` points stored row-contiguously in `points`
    /// (`points.len() == n * dim`).
    pub fn gram(&self, points: &[f64], dim: usize) -> Mat {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            let pi = &points[i * dim..(i + 1) * dim];
            g.set(i, i, self.variance);
            for j in 0..i {
                let pj = &points[j * dim..(j + 1) * dim];
                let v = self.eval(pi, pj);
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Vector of `k(z_i, x)` over the same packed point set.
    pub fn cross(&self, points: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
        assert!(dim > 0 && points.len() % dim == 0);
        assert_eq!(x.len(), dim);
        let n = points.len() / dim;
        (0..n).map(|i| self.eval(&points[i * dim..(i + 1) * dim], x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_known_values() {
        let k = SquaredExpKernel::new(2.0, 1.5).unwrap();
        assert_relative_eq!(k.eval(&[1.0, 2.0], &[1.0, 2.0]), 1.5);
        // ‖a−b‖² = 8, so k = 1.5·exp(−8/8) = 1.5/e.
        assert_relative_eq!(
            k.eval(&[0.0, 0.0], &[2.0, 2.0]),
            1.5 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn gram_is_symmetric_with_variance_diagonal() {
        let k = SquaredExpKernel::new(1.0, 2.0).unwrap();
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 3.0]; // three 2-D points
        let g = k.gram(&pts, 2);
        assert_eq!(g.rows(), 3);
        assert_eq!(g.asymmetry(), 0.0);
        for i in 0..3 {
            assert_relative_eq!(g.get(i, i), 2.0);
        }
        assert_relative_eq!(g.get(0, 1), 2.0 * (-0.5f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn cross_matches_eval() {
        let k = SquaredExpKernel::new(0.7, 1.0).unwrap();
        let pts = [0.0, 1.0, -1.0, 2.0];
        let x = [0.5, 0.5];
        let c = k.cross(&pts, 2, &x);
        assert_eq!(c.len(), 2);
        assert_relative_eq!(c[0], k.eval(&[0.0, 1.0], &x));
        assert_relative_eq!(c[1], k.eval(&[-1.0, 2.0], &x));
    }

    #[test]
    fn rejects_nonpositive_hyperparameters() {
        assert!(SquaredExpKernel::new(0.0, 1.0).is_err());
        assert!(SquaredExpKernel::new(1.0, -2.0).is_err());
        assert!(SquaredExpKernel::new(f64::NAN, 1.0).is_err());
    }
}
