//! State-space model building blocks.
//!
//! A [`StateSpaceModel`] is a transition density `p(x_t | x_{t−1})`, an
//! emission density `p(y_t | x_t)`, and an initial prior `p(x_0)`. The
//! transition is Gaussian around a mean map `f(x_{t−1})`; the emission
//! may be Gaussian, Student-t, or Poisson, each with a linear readout.
//!
//! Gradient conventions: parameter gradients are exposed as
//! transpose-Jacobian products (`out += Jᵀ g`), which is all the training
//! loop needs and avoids materialising Jacobians. Parameter vectors are
//! flattened row-major. Every parameter block carries a per-entry
//! `train_mask`; masked-out entries always receive zero gradient.

use serde::{Deserialize, Serialize};

use crate::numerics::density;
use crate::numerics::{Mat, PsdMat, RngStream};
use crate::{Error, Result};

/// Mean map of the transition density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DynamicsMean {
    /// `f(x) = A x`.
    Linear { a: Mat },
    /// One Euler step of a continuous-time recurrent network,
    /// `f(x) = x + dt·(−x + gain·W tanh(x))/tau`.
    Rnn { w: Mat, gain: f64, tau: f64, dt: f64 },
}

impl DynamicsMean {
    pub fn dim(&self) -> usize {
        match self {
            DynamicsMean::Linear { a } => a.rows(),
            DynamicsMean::Rnn { w, .. } => w.rows(),
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            DynamicsMean::Linear { a } => a.rows() * a.cols(),
            DynamicsMean::Rnn { w, .. } => w.rows() * w.cols(),
        }
    }

    /// Evaluates the mean map.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DynamicsMean::Linear { a } => a.matvec(x),
            DynamicsMean::Rnn { w, gain, tau, dt } => {
                let th: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
                let wx = w.matvec(&th);
                let k = dt / tau;
                x.iter().zip(&wx).map(|(xi, wi)| xi + k * (-xi + gain * wi)).collect()
            }
        }
    }

    /// `out += (∂f/∂x)ᵀ g`.
    pub fn grad_x(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        match self {
            DynamicsMean::Linear { a } => {
                let atg = a.matvec_t(g);
                crate::numerics::axpy(1.0, &atg, out);
            }
            DynamicsMean::Rnn { w, gain, tau, dt } => {
                let k = dt / tau;
                let wtg = w.matvec_t(g);
                for j in 0..x.len() {
                    let sech2 = 1.0 - x[j].tanh().powi(2);
                    out[j] += (1.0 - k) * g[j] + k * gain * sech2 * wtg[j];
                }
            }
        }
    }

    /// `out += (∂f/∂params)ᵀ g`, `out` flattened row-major like the matrix.
    pub fn grad_params(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        match self {
            DynamicsMean::Linear { a } => {
                // ∂f_i/∂A_ij = x_j
                let (r, c) = (a.rows(), a.cols());
                debug_assert_eq!(out.len(), r * c);
                for i in 0..r {
                    crate::numerics::axpy(g[i], x, &mut out[i * c..(i + 1) * c]);
                }
            }
            DynamicsMean::Rnn { w, gain, tau, dt } => {
                // ∂f_i/∂W_ij = (dt·gain/tau)·tanh(x_j)
                let k = dt * gain / tau;
                let th: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
                let (r, c) = (w.rows(), w.cols());
                debug_assert_eq!(out.len(), r * c);
                for i in 0..r {
                    crate::numerics::axpy(k * g[i], &th, &mut out[i * c..(i + 1) * c]);
                }
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            DynamicsMean::Linear { a } => a.data().to_vec(),
            DynamicsMean::Rnn { w, .. } => w.data().to_vec(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            DynamicsMean::Linear { a } => a.data_mut().copy_from_slice(p),
            DynamicsMean::Rnn { w, .. } => w.data_mut().copy_from_slice(p),
        }
    }
}

/// Gaussian transition `x_t ~ N(f(x_{t−1}), Q)`.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub mean: DynamicsMean,
    pub noise: PsdMat,
    /// Per-parameter trainability; all `false` freezes the block.
    pub train_mask: Vec<bool>,
}

/// Log density of one transition plus the gradients the training loop uses.
#[derive(Debug, Clone)]
pub struct TransitionEval {
    pub logp: f64,
    /// ∂ log p / ∂ x_t.
    pub grad_x: Vec<f64>,
    /// ∂ log p / ∂ f (the mean); equals −grad_x for Gaussian transitions.
    pub grad_mean: Vec<f64>,
}

impl Dynamics {
    pub fn new(mean: DynamicsMean, noise: PsdMat) -> Result<Self> {
        if mean.dim() != noise.dim() {
            return Err(Error::dim(format!(
                "dynamics mean dim {} vs noise dim {}",
                mean.dim(),
                noise.dim()
            )));
        }
        let n = mean.param_len();
        Ok(Dynamics { mean, noise, train_mask: vec![false; n] })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn set_trainable(&mut self, on: bool) {
        for m in &mut self.train_mask {
            *m = on;
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.train_mask.iter().filter(|&&m| m).count()
    }

    /// Log density of `x` given the already-evaluated mean `f`.
    pub fn logpdf_at_mean(&self, f: &[f64], x: &[f64]) -> TransitionEval {
        let (logp, grad_x) = density::gaussian_full(x, f, &self.noise);
        let grad_mean = grad_x.iter().map(|g| -g).collect();
        TransitionEval { logp, grad_x, grad_mean }
    }

    pub fn logpdf(&self, x_prev: &[f64], x: &[f64]) -> TransitionEval {
        let f = self.mean.eval(x_prev);
        self.logpdf_at_mean(&f, x)
    }

    pub fn sample(&self, x_prev: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let f = self.mean.eval(x_prev);
        let mut eps = vec![0.0; self.dim()];
        rng.fill_normal(&mut eps);
        let noise = self.noise.correlate(&eps);
        f.iter().zip(&noise).map(|(a, b)| a + b).collect()
    }
}

/// Emission density with linear readout `C x (+ offset)`.
#[derive(Debug, Clone)]
pub enum EmissionKind {
    /// `y ~ N(C x, R)`.
    Gaussian { c: Mat, noise: PsdMat },
    /// Independent Student-t noise per coordinate around `C x + offset`.
    StudentT { c: Mat, offset: Vec<f64>, dof: f64, scale: f64 },
    /// Independent Poisson counts with log rate `C x + offset`.
    Poisson { c: Mat, offset: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Emission {
    pub kind: EmissionKind,
    pub train_mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct EmissionEval {
    pub logp: f64,
    /// ∂ log p / ∂ x.
    pub grad_x: Vec<f64>,
}

impl Emission {
    pub fn gaussian(c: Mat, noise: PsdMat) -> Result<Self> {
        if c.rows() != noise.dim() {
            return Err(Error::dim("emission readout rows vs noise dim"));
        }
        let n = c.rows() * c.cols();
        Ok(Emission { kind: EmissionKind::Gaussian { c, noise }, train_mask: vec![false; n] })
    }

    pub fn student_t(c: Mat, offset: Vec<f64>, dof: f64, scale: f64) -> Result<Self> {
        if c.rows() != offset.len() {
            return Err(Error::dim("emission readout rows vs offset len"));
        }
        if !(dof > 0.0) || !(scale > 0.0) {
            return Err(Error::domain(format!("student-t dof {dof}, scale {scale}")));
        }
        let n = c.rows() * c.cols() + offset.len();
        Ok(Emission {
            kind: EmissionKind::StudentT { c, offset, dof, scale },
            train_mask: vec![false; n],
        })
    }

    pub fn poisson(c: Mat, offset: Vec<f64>) -> Result<Self> {
        if c.rows() != offset.len() {
            return Err(Error::dim("emission readout rows vs offset len"));
        }
        let n = c.rows() * c.cols() + offset.len();
        Ok(Emission { kind: EmissionKind::Poisson { c, offset }, train_mask: vec![false; n] })
    }

    pub fn readout(&self) -> &Mat {
        match &self.kind {
            EmissionKind::Gaussian { c, .. }
            | EmissionKind::StudentT { c, .. }
            | EmissionKind::Poisson { c, .. } => c,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.readout().rows()
    }

    pub fn state_dim(&self) -> usize {
        self.readout().cols()
    }

    pub fn param_len(&self) -> usize {
        self.train_mask.len()
    }

    pub fn set_trainable(&mut self, on: bool) {
        for m in &mut self.train_mask {
            *m = on;
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.train_mask.iter().filter(|&&m| m).count()
    }

    pub fn logpdf(&self, x: &[f64], y: &[f64]) -> EmissionEval {
        match &self.kind {
            EmissionKind::Gaussian { c, noise } => {
                let m = c.matvec(x);
                let (logp, g_y) = density::gaussian_full(y, &m, noise);
                // ∂/∂m = −∂/∂y, then chain through m = Cx.
                let g_m: Vec<f64> = g_y.iter().map(|g| -g).collect();
                EmissionEval { logp, grad_x: c.matvec_t(&g_m) }
            }
            EmissionKind::StudentT { c, offset, dof, scale } => {
                let m = c.matvec(x);
                let resid: Vec<f64> =
                    y.iter().zip(&m).zip(offset).map(|((yi, mi), oi)| yi - mi - oi).collect();
                let (logp, g_r) = density::student_t_resid(&resid, *dof, *scale);
                // ∂r/∂x = −C, so ∂logp/∂x = −Cᵀ g_r.
                let neg: Vec<f64> = g_r.iter().map(|g| -g).collect();
                EmissionEval { logp, grad_x: c.matvec_t(&neg) }
            }
            EmissionKind::Poisson { c, offset } => {
                let mut eta = c.matvec(x);
                for (e, o) in eta.iter_mut().zip(offset) {
                    *e += o;
                }
                let (logp, g_eta) = density::poisson_log_rate(y, &eta);
                EmissionEval { logp, grad_x: c.matvec_t(&g_eta) }
            }
        }
    }

    /// Like [`Self::logpdf`] but also accumulates `out += ∂ log p/∂ params`
    /// (layout `[C row-major, offset]`, mask applied by the caller).
    pub fn logpdf_grad_params(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> EmissionEval {
        debug_assert_eq!(out.len(), self.param_len());
        match &self.kind {
            EmissionKind::Gaussian { c, noise } => {
                let m = c.matvec(x);
                let (logp, g_y) = density::gaussian_full(y, &m, noise);
                let g_m: Vec<f64> = g_y.iter().map(|g| -g).collect();
                let cols = c.cols();
                for i in 0..c.rows() {
                    crate::numerics::axpy(g_m[i], x, &mut out[i * cols..(i + 1) * cols]);
                }
                EmissionEval { logp, grad_x: c.matvec_t(&g_m) }
            }
            EmissionKind::StudentT { c, offset, dof, scale } => {
                let m = c.matvec(x);
                let resid: Vec<f64> =
                    y.iter().zip(&m).zip(offset).map(|((yi, mi), oi)| yi - mi - oi).collect();
                let (logp, g_r) = density::student_t_resid(&resid, *dof, *scale);
                // ∂logp/∂m_i = −g_r[i]; same for the offset.
                let cols = c.cols();
                let nc = c.rows() * cols;
                for i in 0..c.rows() {
                    crate::numerics::axpy(-g_r[i], x, &mut out[i * cols..(i + 1) * cols]);
                    out[nc + i] -= g_r[i];
                }
                let neg: Vec<f64> = g_r.iter().map(|g| -g).collect();
                EmissionEval { logp, grad_x: c.matvec_t(&neg) }
            }
            EmissionKind::Poisson { c, offset } => {
                let mut eta = c.matvec(x);
                for (e, o) in eta.iter_mut().zip(offset) {
                    *e += o;
                }
                let (logp, g_eta) = density::poisson_log_rate(y, &eta);
                let cols = c.cols();
                let nc = c.rows() * cols;
                for i in 0..c.rows() {
                    crate::numerics::axpy(g_eta[i], x, &mut out[i * cols..(i + 1) * cols]);
                    out[nc + i] += g_eta[i];
                }
                EmissionEval { logp, grad_x: c.matvec_t(&g_eta) }
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            EmissionKind::Gaussian { c, .. } => c.data().to_vec(),
            EmissionKind::StudentT { c, offset, .. } | EmissionKind::Poisson { c, offset } => {
                let mut p = c.data().to_vec();
                p.extend_from_slice(offset);
                p
            }
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match &mut self.kind {
            EmissionKind::Gaussian { c, .. } => c.data_mut().copy_from_slice(p),
            EmissionKind::StudentT { c, offset, .. } | EmissionKind::Poisson { c, offset } => {
                let nc = c.rows() * c.cols();
                c.data_mut().copy_from_slice(&p[..nc]);
                offset.copy_from_slice(&p[nc..]);
            }
        }
    }

    pub fn sample(&self, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        match &self.kind {
            EmissionKind::Gaussian { c, noise } => {
                let m = c.matvec(x);
                let mut eps = vec![0.0; noise.dim()];
                rng.fill_normal(&mut eps);
                let n = noise.correlate(&eps);
                m.iter().zip(&n).map(|(a, b)| a + b).collect()
            }
            EmissionKind::StudentT { c, offset, dof, scale } => {
                let m = c.matvec(x);
                m.iter()
                    .zip(offset)
                    .map(|(mi, oi)| mi + oi + scale * rng.next_student_t(*dof))
                    .collect()
            }
            EmissionKind::Poisson { c, offset } => {
                let mut eta = c.matvec(x);
                for (e, o) in eta.iter_mut().zip(offset) {
                    *e += o;
                }
                eta.iter().map(|e| rng.next_poisson(e.exp()) as f64).collect()
            }
        }
    }
}

/// One particle's Gaussian transition law for a single step: either the
/// parametric `N(f(x_prev), Q)` or a GP-marginalised `N(v, s·I)`.
/// Both the filtering engines and the proposals consume this, so the
/// bootstrap proposal and the transition term in the weight are evaluated
/// by the same code and cancel exactly.
#[derive(Debug)]
pub enum StepDist<'a> {
    Full { mean: Vec<f64>, cov: &'a PsdMat },
    Iso { mean: Vec<f64>, var: f64 },
}

impl StepDist<'_> {
    pub fn dim(&self) -> usize {
        self.mean().len()
    }

    pub fn mean(&self) -> &[f64] {
        match self {
            StepDist::Full { mean, .. } | StepDist::Iso { mean, .. } => mean,
        }
    }

    /// Maps standard-normal noise to a draw from this law.
    pub fn sample_with(&self, eps: &[f64]) -> Vec<f64> {
        match self {
            StepDist::Full { mean, cov } => {
                let n = cov.correlate(eps);
                mean.iter().zip(&n).map(|(a, b)| a + b).collect()
            }
            StepDist::Iso { mean, var } => {
                let s = var.sqrt();
                mean.iter().zip(eps).map(|(a, e)| a + s * e).collect()
            }
        }
    }

    /// `(log p(x), ∂ log p/∂x)`; the mean gradient is the negation.
    pub fn logpdf(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            StepDist::Full { mean, cov } => density::gaussian_full(x, mean, cov),
            StepDist::Iso { mean, var } => density::gaussian_iso(x, mean, *var),
        }
    }
}

/// Gaussian initial state prior.
#[derive(Debug, Clone)]
pub struct InitialPrior {
    pub mean: Vec<f64>,
    pub cov: PsdMat,
}

impl InitialPrior {
    pub fn new(mean: Vec<f64>, cov: PsdMat) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::dim("prior mean len vs cov dim"));
        }
        crate::numerics::check_finite(&mean, "prior mean")?;
        Ok(InitialPrior { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        InitialPrior { mean: vec![0.0; dim], cov: PsdMat::isotropic(dim, 1.0).unwrap() }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut eps = vec![0.0; self.mean.len()];
        rng.fill_normal(&mut eps);
        let n = self.cov.correlate(&eps);
        self.mean.iter().zip(&n).map(|(a, b)| a + b).collect()
    }
}

/// Complete state-space model.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    pub dynamics: Dynamics,
    pub emission: Emission,
    pub prior: InitialPrior,
}

impl StateSpaceModel {
    pub fn new(dynamics: Dynamics, emission: Emission, prior: InitialPrior) -> Result<Self> {
        if dynamics.dim() != emission.state_dim() {
            return Err(Error::dim(format!(
                "dynamics dim {} vs emission state dim {}",
                dynamics.dim(),
                emission.state_dim()
            )));
        }
        if dynamics.dim() != prior.mean.len() {
            return Err(Error::dim("dynamics dim vs prior dim"));
        }
        Ok(StateSpaceModel { dynamics, emission, prior })
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.emission.obs_dim()
    }

    /// Simulates `t_max` steps, returning latents `x_1..x_T` and
    /// observations `y_1..y_T` (the prior draw `x_0` is discarded).
    pub fn simulate(&self, t_max: usize, rng_root: &RngStream) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        use crate::numerics::rng::tag;
        let x = self.prior.sample(&mut rng_root.derive(&[tag::SIMULATE, 0, 0]));
        self.simulate_from(&x, t_max, rng_root)
    }

    /// Simulates `t_max` recorded steps starting from a given state, using
    /// the same per-step randomness streams as [`simulate`](Self::simulate).
    pub fn simulate_from(
        &self,
        x0: &[f64],
        t_max: usize,
        rng_root: &RngStream,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        use crate::numerics::rng::tag;
        let mut xs = Vec::with_capacity(t_max);
        let mut ys = Vec::with_capacity(t_max);
        let mut x = x0.to_vec();
        for t in 1..=t_max {
            let mut r_trans = rng_root.derive(&[tag::SIMULATE, t as u64, 1]);
            let mut r_emit = rng_root.derive(&[tag::SIMULATE, t as u64, 2]);
            x = self.dynamics.sample(&x, &mut r_trans);
            let y = self.emission.sample(&x, &mut r_emit);
            xs.push(x.clone());
            ys.push(y);
        }
        (xs, ys)
    }
}
