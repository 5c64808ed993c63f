//! Numeric building blocks: small dense linear algebra, stable
//! reductions, counter-based randomness, kernels, and log densities.

pub mod density;
pub mod kernel;
pub mod linalg;
pub mod rng;

pub use kernel::SquaredExpKernel;
pub use linalg::{Mat, PsdMat};
pub use rng::RngStream;

use crate::{Error, Result};

/// Numerically stable log(Σ exp(v_i)) via max-shift.
///
/// `-inf` entries are permitted and contribute nothing; the input must be
/// non-empty, contain no NaN or `+inf`, and have at least one finite entry.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::domain("logsumexp of empty slice"));
    }
    let mut m = f64::NEG_INFINITY;
    for &x in v {
        if x.is_nan() || x == f64::INFINITY {
            return Err(Error::domain(format!("logsumexp input {x}")));
        }
        if x > m {
            m = x;
        }
    }
    if m == f64::NEG_INFINITY {
        return Err(Error::domain("logsumexp: all inputs are -inf"));
    }
    let sum: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Checks that every entry of `v` is finite.
pub fn check_finite(v: &[f64], what: &str) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::domain(format!("{what}[{i}] = {x} is not finite")));
        }
    }
    Ok(())
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product (lengths must match; checked by debug assertion only).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += s * v`.
pub fn axpy(s: f64, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len());
    for (o, &x) in out.iter_mut().zip(v) {
        *o += s * x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_naive_in_safe_range() {
        let v: [f64; 4] = [0.3, -1.2, 2.0, 0.0];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&v).unwrap(), naive, max_relative = 1e-14);
    }

    #[test]
    fn logsumexp_survives_large_magnitudes() {
        // exp(1000) overflows f64; the shifted form must not.
        let v = [1000.0, 1000.0];
        let got = logsumexp(&v).unwrap();
        assert_relative_eq!(got, 1000.0 + (2.0f64).ln(), max_relative = 1e-15);

        let w = [-1000.0, -1000.0, -1001.0];
        let naive_shifted = -1000.0 + (2.0 + (-1.0f64).exp()).ln();
        assert_relative_eq!(logsumexp(&w).unwrap(), naive_shifted, max_relative = 1e-14);
    }

    #[test]
    fn logsumexp_ignores_neg_infinity_entries() {
        let v = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        assert_relative_eq!(logsumexp(&v).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn logsumexp_rejects_degenerate_inputs() {
        assert!(logsumexp(&[]).is_err());
        assert!(logsumexp(&[f64::NEG_INFINITY; 3]).is_err());
        assert!(logsumexp(&[1.0, f64::NAN]).is_err());
        assert!(logsumexp(&[1.0, f64::INFINITY]).is_err());
    }
}
