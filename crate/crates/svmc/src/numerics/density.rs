//! Log densities with the analytic gradients the training paths need.
//!
//! Conventions: `grad_x` is the gradient with respect to the evaluation
//! point, `grad_mean` with respect to the location parameter. Covariances
//! and shape parameters are treated as fixed (they are never trained
//! here), so no gradients are produced for them.

use statrs::function::gamma::ln_gamma;

use super::linalg::PsdMat;

pub const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Multivariate normal with full covariance. Returns the log density and
/// its gradient with respect to `x`; the gradient with respect to the
/// mean is the negation.
pub fn gaussian_full(x: &[f64], mean: &[f64], cov: &PsdMat) -> (f64, Vec<f64>) {
    let d = cov.dim();
    debug_assert_eq!(x.len(), d);
    debug_assert_eq!(mean.len(), d);
    let resid: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let alpha = cov.solve(&resid); // Σ⁻¹ (x − μ)
    let quad = crate::numerics::dot(&resid, &alpha);
    let logp = -0.5 * (d as f64 * LN_2PI + cov.log_det() + quad);
    let grad_x: Vec<f64> = alpha.iter().map(|a| -a).collect();
    (logp, grad_x)
}

/// Diagonal normal parameterised by standard deviations.
pub fn gaussian_diag(x: &[f64], mean: &[f64], sigma: &[f64]) -> (f64, Vec<f64>) {
    let d = x.len();
    debug_assert_eq!(mean.len(), d);
    debug_assert_eq!(sigma.len(), d);
    let mut logp = -0.5 * d as f64 * LN_2PI;
    let mut grad_x = vec![0.0; d];
    for i in 0..d {
        let s = sigma[i];
        let z = (x[i] - mean[i]) / s;
        logp -= s.ln() + 0.5 * z * z;
        grad_x[i] = -z / s;
    }
    (logp, grad_x)
}

/// Isotropic normal `N(x; mean, var·I)`.
pub fn gaussian_iso(x: &[f64], mean: &[f64], var: f64) -> (f64, Vec<f64>) {
    let d = x.len();
    debug_assert_eq!(mean.len(), d);
    let mut quad = 0.0;
    let mut grad_x = vec![0.0; d];
    for i in 0..d {
        let r = x[i] - mean[i];
        quad += r * r;
        grad_x[i] = -r / var;
    }
    let logp = -0.5 * (d as f64 * (LN_2PI + var.ln()) + quad / var);
    (logp, grad_x)
}

/// Independent Student-t residuals, one per coordinate, with common
/// degrees of freedom `dof` and scale `scale`. Takes the residual vector
/// directly; returns the log density and its gradient with respect to
/// the residuals.
pub fn student_t_resid(resid: &[f64], dof: f64, scale: f64) -> (f64, Vec<f64>) {
    debug_assert!(dof > 0.0 && scale > 0.0);
    let d = resid.len();
    let norm = ln_gamma((dof + 1.0) * 0.5)
        - ln_gamma(dof * 0.5)
        - 0.5 * (dof * std::f64::consts::PI).ln()
        - scale.ln();
    let mut logp = d as f64 * norm;
    let mut grad = vec![0.0; d];
    let vs2 = dof * scale * scale;
    for i in 0..d {
        let r = resid[i];
        logp -= 0.5 * (dof + 1.0) * (1.0 + r * r / vs2).ln();
        grad[i] = -(dof + 1.0) * r / (vs2 + r * r);
    }
    (logp, grad)
}

/// Independent Poisson counts with log rates `eta` (`rate = exp(eta)`).
/// Returns the log mass and its gradient with respect to `eta`.
pub fn poisson_log_rate(counts: &[f64], eta: &[f64]) -> (f64, Vec<f64>) {
    let d = counts.len();
    debug_assert_eq!(eta.len(), d);
    let mut logp = 0.0;
    let mut grad = vec![0.0; d];
    for i in 0..d {
        let y = counts[i];
        debug_assert!(y >= 0.0 && y.fract() == 0.0, "Poisson count {y}");
        let rate = eta[i].exp();
        logp += y * eta[i] - rate - ln_gamma(y + 1.0);
        grad[i] = y - rate;
    }
    (logp, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::Mat;
    use approx::assert_relative_eq;

    fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let up = f(&xp);
            xp[i] = x[i] - step;
            let dn = f(&xp);
            xp[i] = x[i];
            g[i] = (up - dn) / (2.0 * step);
        }
        g
    }

    #[test]
    fn standard_normal_at_origin() {
        let cov = PsdMat::isotropic(1, 1.0).unwrap();
        let (lp, g) = gaussian_full(&[0.0], &[0.0], &cov);
        assert_relative_eq!(lp, -0.5 * LN_2PI, max_relative = 1e-15);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn full_and_diag_agree_on_diagonal_covariance() {
        let sigma = [0.5, 2.0, 1.3];
        let cov =
            PsdMat::cholesky(Mat::diag(&sigma.iter().map(|s| s * s).collect::<Vec<_>>())).unwrap();
        let x = [0.3, -1.0, 2.2];
        let mean = [0.1, 0.0, -0.4];
        let (lp_full, g_full) = gaussian_full(&x, &mean, &cov);
        let (lp_diag, g_diag) = gaussian_diag(&x, &mean, &sigma);
        assert_relative_eq!(lp_full, lp_diag, max_relative = 1e-13);
        for (a, b) in g_full.iter().zip(&g_diag) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn iso_matches_diag() {
        let var = 0.73_f64;
        let sigma = [var.sqrt(); 4];
        let x = [1.0, -0.2, 0.0, 3.0];
        let mean = [0.5, 0.5, 0.5, 0.5];
        let (a, ga) = gaussian_iso(&x, &mean, var);
        let (b, gb) = gaussian_diag(&x, &mean, &sigma);
        assert_relative_eq!(a, b, max_relative = 1e-13);
        for (u, v) in ga.iter().zip(&gb) {
            assert_relative_eq!(u, v, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_full_gradient_matches_finite_differences() {
        let cov =
            PsdMat::cholesky(Mat::new(2, 2, vec![2.0, 0.6, 0.6, 1.0]).unwrap()).unwrap();
        let mean = [0.4, -0.7];
        let x = [1.1, 0.3];
        let (_, g) = gaussian_full(&x, &mean, &cov);
        let fd = fd_grad(|p| gaussian_full(p, &mean, &cov).0, &x);
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn student_t_gradient_matches_finite_differences() {
        let resid = [0.9, -2.4, 0.05];
        let (_, g) = student_t_resid(&resid, 2.0, 0.1);
        let fd = fd_grad(|r| student_t_resid(r, 2.0, 0.1).0, &resid);
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-5);
        }
    }

    #[test]
    fn student_t_approaches_gaussian_for_large_dof() {
        let resid = [0.7];
        let (t, _) = student_t_resid(&resid, 1e7, 1.0);
        let (n, _) = gaussian_diag(&resid, &[0.0], &[1.0]);
        assert_relative_eq!(t, n, epsilon = 1e-5);
    }

    #[test]
    fn poisson_log_rate_known_value_and_gradient() {
        // P(y=3 | rate=2): ln(2³ e⁻² / 3!) = 3 ln 2 − 2 − ln 6.
        let eta = [2.0f64.ln()];
        let (lp, g) = poisson_log_rate(&[3.0], &eta);
        assert_relative_eq!(lp, 3.0 * 2.0f64.ln() - 2.0 - 6.0f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(g[0], 3.0 - 2.0, max_relative = 1e-13);
        let fd = fd_grad(|e| poisson_log_rate(&[3.0], e).0, &eta);
        assert_relative_eq!(g[0], fd[0], max_relative = 1e-7);
    }

    #[test]
    fn poisson_mass_sums_to_one() {
        let eta = [1.3f64.ln()];
        let total: f64 = (0..60).map(|y| poisson_log_rate(&[y as f64], &eta).0.exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }
}
