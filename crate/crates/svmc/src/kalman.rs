//! Exact Kalman filter for linear-Gaussian state-space models.
//!
//! Serves as the ground-truth reference: on a linear-Gaussian system the
//! particle filters in this crate must reproduce (in expectation) the
//! marginal likelihood and filtered moments computed here.

use crate::models::{DynamicsMean, EmissionKind, StateSpaceModel};
use crate::numerics::density::LN_2PI;
use crate::numerics::{Mat, PsdMat};
use crate::{Error, Result};

/// Gaussian filtering distribution `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub cov: Mat,
}

/// Time-invariant Kalman filter with transition `(A, Q)` and emission `(C, R)`.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    a: Mat,
    q: Mat,
    c: Mat,
    r: Mat,
}

impl KalmanFilter {
    pub fn new(a: Mat, q: Mat, c: Mat, r: Mat) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || q.rows() != n || !q.is_square() {
            return Err(Error::dim("Kalman: A and Q must be square with equal dim"));
        }
        if c.cols() != n || r.rows() != c.rows() || !r.is_square() {
            return Err(Error::dim("Kalman: C/R shapes inconsistent with A"));
        }
        Ok(KalmanFilter { a, q, c, r })
    }

    pub fn obs_dim(&self) -> usize {
        self.c.rows()
    }

    /// Extracts the exact filter when the model is linear-Gaussian.
    pub fn from_model(model: &StateSpaceModel) -> Option<Self> {
        let a = match &model.dynamics.mean {
            DynamicsMean::Linear { a } => a.clone(),
            _ => return None,
        };
        let (c, r) = match &model.emission.kind {
            EmissionKind::Gaussian { c, noise } => (c.clone(), noise.mat().clone()),
            _ => return None,
        };
        KalmanFilter::new(a, model.dynamics.noise.mat().clone(), c, r).ok()
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Time update: `N(A m, A P Aᵀ + Q)`.
    pub fn predict(&self, belief: &GaussianBelief) -> GaussianBelief {
        let mean = self.a.matvec(&belief.mean);
        let mut cov = self.a.matmul(&belief.cov).matmul(&self.a.transpose()).add(&self.q);
        cov.symmetrize();
        GaussianBelief { mean, cov }
    }

    /// Measurement update on a predicted belief. Returns the posterior and
    /// the log predictive density `log p(y | y_{1:t−1})`. Uses the Joseph
    /// form so the covariance stays symmetric PSD.
    pub fn update(&self, pred: &GaussianBelief, y: &[f64]) -> Result<(GaussianBelief, f64)> {
        let n = self.state_dim();
        let m_obs = self.c.rows();
        if y.len() != m_obs {
            return Err(Error::dim(format!("Kalman update: y len {} vs {}", y.len(), m_obs)));
        }
        let y_pred = self.c.matvec(&pred.mean);
        let innov: Vec<f64> = y.iter().zip(&y_pred).map(|(a, b)| a - b).collect();

        let mut s = self.c.matmul(&pred.cov).matmul(&self.c.transpose()).add(&self.r);
        s.symmetrize();
        let s_chol = PsdMat::cholesky(s)?;

        let log_pred = -0.5
            * (m_obs as f64 * LN_2PI + s_chol.log_det() + s_chol.inv_quad(&innov));

        // Gain K = P Cᵀ S⁻¹; with S symmetric, row i of K is S⁻¹ (P Cᵀ)ᵢ.
        let pct = pred.cov.matmul(&self.c.transpose());
        let mut k = Mat::zeros(n, m_obs);
        for i in 0..n {
            let row = s_chol.solve(pct.row(i));
            for j in 0..m_obs {
                k.set(i, j, row[j]);
            }
        }

        let mut mean = pred.mean.clone();
        crate::numerics::axpy(1.0, &k.matvec(&innov), &mut mean);

        // Joseph form: (I − KC) P (I − KC)ᵀ + K R Kᵀ.
        let ikc = Mat::identity(n).sub(&k.matmul(&self.c));
        let mut cov = ikc
            .matmul(&pred.cov)
            .matmul(&ikc.transpose())
            .add(&k.matmul(&self.r).matmul(&k.transpose()));
        cov.symmetrize();

        Ok((GaussianBelief { mean, cov }, log_pred))
    }

    /// One predict–update cycle.
    pub fn step(&self, belief: &GaussianBelief, y: &[f64]) -> Result<(GaussianBelief, f64)> {
        let pred = self.predict(belief);
        self.update(&pred, y)
    }

    /// Filters a whole sequence from `prior`, returning per-step beliefs
    /// and log-likelihood increments.
    pub fn run(
        &self,
        prior: &GaussianBelief,
        ys: &[Vec<f64>],
    ) -> Result<(Vec<GaussianBelief>, Vec<f64>)> {
        let mut beliefs = Vec::with_capacity(ys.len());
        let mut incs = Vec::with_capacity(ys.len());
        let mut b = prior.clone();
        for y in ys {
            let (nb, inc) = self.step(&b, y)?;
            incs.push(inc);
            beliefs.push(nb.clone());
            b = nb;
        }
        Ok((beliefs, incs))
    }

    /// Total log marginal likelihood of a sequence.
    pub fn log_likelihood(&self, prior: &GaussianBelief, ys: &[Vec<f64>]) -> Result<f64> {
        Ok(self.run(prior, ys)?.1.iter().sum())
    }
}
