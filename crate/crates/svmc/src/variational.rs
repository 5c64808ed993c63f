//! Online proposal adaptation.
//!
//! Each filtering step first runs a handful of stochastic-gradient
//! iterations on a per-step surrogate objective, then performs the usual
//! propose–weight–resample pass with the freshly updated proposal.
//!
//! One gradient iteration draws `grad_particles` ancestors from the
//! previous weights, reparameterises one proposal draw per ancestor, and
//! scores `Σ_j [log p(y|x_j) + log p(x_j|x_prev_j) − log r(x_j)]` — the
//! sum of log incremental importance weights, whose expectation lower
//! bounds the log evidence increment. Gradients flow through the draw
//! (reparameterisation), through the proposal density, and — when
//! enabled — into the dynamics/emission parameters via transpose-Jacobian
//! products. Everything is exact; there are no score-function terms.
//!
//! With `sgd_steps = 0` (or a bootstrap proposal) a step reduces exactly,
//! bit for bit, to [`crate::smc::smc_step`].

use serde::{Deserialize, Serialize};

use crate::models::{Dynamics, DynamicsMean, Emission, StateSpaceModel, StepDist};
use crate::numerics::rng::tag;
use crate::numerics::RngStream;
use crate::proposal::{apply_param_step, Proposal};
use crate::smc::{multinomial_ancestors, smc_step, ParticleCloud, StepDiag, StepOpts};
use crate::{Error, Result};

/// Ascent rule for the per-step objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Adam with bias correction; the default, robust to the scale
    /// differences between mean, gain, and log-scale parameters.
    Adam,
    /// Plain stochastic gradient ascent with a fixed step size.
    Sgd,
}

/// Knobs for the per-step gradient loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Ancestors drawn per gradient iteration (L).
    pub grad_particles: usize,
    /// Gradient iterations per filtering step.
    pub sgd_steps: usize,
    /// Step size. Zero is allowed and leaves parameters untouched (the
    /// gradient loop still runs, so diagnostics are still reported).
    pub learning_rate: f64,
    /// Global L2 gradient clip.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    /// Also train the transition mean parameters (subject to their mask).
    pub train_dynamics: bool,
    /// Also train the emission readout parameters (subject to their mask).
    pub train_emission: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grad_particles: 4,
            sgd_steps: 25,
            learning_rate: 0.001,
            clip_norm: 10.0,
            optimizer: Optimizer::Adam,
            train_dynamics: false,
            train_emission: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grad_particles == 0 {
            return Err(Error::Config("grad_particles must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate {}", self.learning_rate)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config(format!("clip_norm {}", self.clip_norm)));
        }
        Ok(())
    }
}

/// Adam with bias correction, used in ascent mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Returns the ascent step `+lr · m̂ / (√v̂ + eps)` for `grad`.
    pub fn step(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut delta = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            delta[i] = lr * mh / (vh.sqrt() + self.eps);
        }
        delta
    }
}

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns
/// the pre-clip norm.
pub fn clip_grad(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = crate::numerics::norm2(grad);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Slices of the flat trainable-parameter vector: `[proposal | dynamics | emission]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThetaLayout {
    pub prop: usize,
    pub dynamics: usize,
    pub emission: usize,
}

impl ThetaLayout {
    pub fn total(&self) -> usize {
        self.prop + self.dynamics + self.emission
    }
}

/// Optimiser state for one run: the flat layout plus Adam moments, which
/// persist across filtering steps (the proposal is warm-started).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    pub config: TrainConfig,
    pub layout: ThetaLayout,
    pub adam: AdamState,
}

impl Trainer {
    pub fn new(prop: &Proposal, dyn_params: usize, emis_params: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let layout = ThetaLayout {
            prop: prop.param_len(),
            dynamics: if config.train_dynamics { dyn_params } else { 0 },
            emission: if config.train_emission { emis_params } else { 0 },
        };
        Ok(Trainer { adam: AdamState::new(layout.total()), layout, config })
    }

    pub fn for_model(prop: &Proposal, model: &StateSpaceModel, config: TrainConfig) -> Result<Self> {
        Self::new(prop, model.dynamics.mean.param_len(), model.emission.param_len(), config)
    }

    /// Clips, takes one Adam ascent step, and writes the updates back into
    /// the proposal and any trained model blocks. Returns the pre-clip
    /// gradient norm.
    pub fn apply(
        &mut self,
        grad: &mut [f64],
        prop: &mut Proposal,
        mut dynamics: Option<&mut Dynamics>,
        mut emission: Option<&mut Emission>,
    ) -> Result<f64> {
        debug_assert_eq!(grad.len(), self.layout.total());
        let norm = clip_grad(grad, self.config.clip_norm);
        if !norm.is_finite() {
            return Err(Error::domain("non-finite gradient in proposal adaptation"));
        }
        let delta = match self.config.optimizer {
            Optimizer::Adam => self.adam.step(grad, self.config.learning_rate),
            Optimizer::Sgd => {
                grad.iter().map(|g| self.config.learning_rate * g).collect()
            }
        };
        let (p, d) = (self.layout.prop, self.layout.dynamics);
        apply_param_step(prop, &delta[..p])?;
        if d > 0 {
            let dyn_ = dynamics.as_deref_mut().expect("layout trains dynamics");
            let mut params = dyn_.mean.params();
            crate::numerics::axpy(1.0, &delta[p..p + d], &mut params);
            crate::numerics::check_finite(&params, "dynamics params")?;
            dyn_.mean.set_params(&params);
        }
        if self.layout.emission > 0 {
            let em = emission.as_deref_mut().expect("layout trains emission");
            let mut params = em.params();
            crate::numerics::axpy(1.0, &delta[p + d..], &mut params);
            crate::numerics::check_finite(&params, "emission params")?;
            em.set_params(&params);
        }
        Ok(norm)
    }
}

/// Monte-Carlo estimate of the per-step surrogate objective and its exact
/// gradient for a parametric model, using the gradient randomness streams
/// for iteration `k`. This is the same estimator `svmc_step` ascends;
/// it is exposed so the chain of hand-written derivatives can be checked
/// end to end against finite differences of the returned objective.
///
/// `g_out` must have length `ThetaLayout` would assign for this proposal
/// and config (`Trainer::for_model(..).layout.total()`).
pub fn step_objective_grad(
    cloud: &ParticleCloud<()>,
    model: &StateSpaceModel,
    prop: &Proposal,
    config: &TrainConfig,
    y: &[f64],
    k: u64,
    run_root: &RngStream,
    g_out: &mut [f64],
) -> Result<f64> {
    let layout = Trainer::for_model(prop, model, config.clone())?.layout;
    if g_out.len() != layout.total() {
        return Err(Error::dim(format!(
            "gradient buffer {} vs layout {}",
            g_out.len(),
            layout.total()
        )));
    }
    let w_prev = cloud.normalized_weights()?;
    let dyn_grad = if config.train_dynamics {
        Some((&model.dynamics.mean, model.dynamics.train_mask.as_slice()))
    } else {
        None
    };
    sgd_pass(
        cloud,
        &w_prev,
        |_, xp| StepDist::Full { mean: model.dynamics.mean.eval(xp), cov: &model.dynamics.noise },
        &model.emission,
        dyn_grad,
        config.train_emission,
        prop,
        y,
        k,
        config.grad_particles,
        run_root,
        &layout,
        g_out,
    )
}

/// One gradient iteration: draws `grad_particles` ancestors and noise,
/// scores the surrogate objective (averaged over the draws), and writes
/// its exact gradient into the zeroed buffer `g_out` (layout
/// `[proposal | dynamics | emission]`). Pure in the cloud and
/// configuration — randomness is addressed by `(step, k)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sgd_pass<'q, A, F>(
    cloud: &ParticleCloud<A>,
    w_prev: &[f64],
    dist_of: F,
    emission: &Emission,
    dyn_grad: Option<(&DynamicsMean, &[bool])>,
    emis_train: bool,
    prop: &Proposal,
    y: &[f64],
    k: u64,
    grad_particles: usize,
    run_root: &RngStream,
    layout: &ThetaLayout,
    g_out: &mut [f64],
) -> Result<f64>
where
    A: Clone,
    F: Fn(usize, &[f64]) -> StepDist<'q>,
{
    let t = (cloud.step() + 1) as u64;
    let d = cloud.dim();
    let mut rng_anc = run_root.derive(&[t, tag::SGD_ANCESTOR, k]);
    let ancestors = multinomial_ancestors(w_prev, grad_particles, &mut rng_anc);

    let (p_len, d_len) = (layout.prop, layout.dynamics);
    let mut objective = 0.0;
    let mut eps = vec![0.0; d];
    let mut emis_g = vec![0.0; if emis_train { emission.param_len() } else { 0 }];

    for (j, &a) in ancestors.iter().enumerate() {
        let x_prev = cloud.state(a);
        let dist = dist_of(a, x_prev);
        let mut rng_eps = run_root.derive(&[t, tag::SGD_EPS, k, j as u64]);
        rng_eps.fill_normal(&mut eps);
        let drawn = prop.draw(&dist, y, &eps);

        let (lp_trans, g_trans_x) = dist.logpdf(&drawn.x);
        let ev = if emis_train {
            emission.logpdf_grad_params(&drawn.x, y, &mut emis_g)
        } else {
            emission.logpdf(&drawn.x, y)
        };
        objective += ev.logp + (lp_trans - drawn.log_r);

        // ∂L/∂x from the emission and transition terms.
        let gx_model: Vec<f64> = ev.grad_x.iter().zip(&g_trans_x).map(|(a, b)| a + b).collect();
        let mut g_feature = vec![0.0; d];
        prop.backprop(&drawn.tape, &gx_model, -1.0, &mut g_out[..p_len], &mut g_feature);

        if let Some((mean, mask)) = dyn_grad {
            // The transition density's own mean dependence, then the full
            // feature gradient routed into the mean-map parameters.
            for (gf, gt) in g_feature.iter_mut().zip(&g_trans_x) {
                *gf -= gt; // grad_mean = −grad_x
            }
            let mut block = vec![0.0; d_len];
            mean.grad_params(x_prev, &g_feature, &mut block);
            for (i, (b, &m)) in block.iter().zip(mask).enumerate() {
                if m {
                    g_out[p_len + i] += b;
                }
            }
        }
    }

    if emis_train {
        for (i, (&g, &m)) in emis_g.iter().zip(&emission.train_mask).enumerate() {
            if m {
                g_out[p_len + d_len + i] += g;
            }
        }
    }
    // The estimator is the average over the gradient draws.
    let inv = 1.0 / grad_particles as f64;
    objective *= inv;
    for g in g_out.iter_mut() {
        *g *= inv;
    }
    Ok(objective)
}

/// Diagnostics from one adaptive step: the filtering diagnostics plus the
/// last gradient iteration's objective and pre-clip gradient norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptDiag {
    pub filter: StepDiag,
    pub objective: Option<f64>,
    pub grad_norm: Option<f64>,
    pub sgd_steps_run: usize,
}

/// One adaptive filtering step for a parametric model: `sgd_steps`
/// gradient iterations on the proposal (and optionally the model), then a
/// standard particle-filter step. The final pass is byte-identical to
/// [`smc_step`] when no gradient iterations run.
pub fn svmc_step(
    cloud: &mut ParticleCloud<()>,
    model: &mut StateSpaceModel,
    prop: &mut Proposal,
    trainer: &mut Trainer,
    y: &[f64],
    opts: &StepOpts,
    run_root: &RngStream,
) -> Result<AdaptDiag> {
    let n_sgd = if prop.is_trainable() { trainer.config.sgd_steps } else { 0 };
    let mut objective = None;
    let mut grad_norm = None;
    if n_sgd > 0 {
        let w_prev = cloud.normalized_weights()?;
        let layout = trainer.layout;
        for k in 0..n_sgd {
            let mut g = vec![0.0; layout.total()];
            let dyn_grad = if trainer.config.train_dynamics {
                Some((&model.dynamics.mean, model.dynamics.train_mask.as_slice()))
            } else {
                None
            };
            let obj = sgd_pass(
                cloud,
                &w_prev,
                |_, xp| StepDist::Full {
                    mean: model.dynamics.mean.eval(xp),
                    cov: &model.dynamics.noise,
                },
                &model.emission,
                dyn_grad,
                trainer.config.train_emission,
                prop,
                y,
                k as u64,
                trainer.config.grad_particles,
                run_root,
                &layout,
                &mut g,
            )?;
            let norm = trainer.apply(&mut g, prop, Some(&mut model.dynamics), Some(&mut model.emission))?;
            objective = Some(obj);
            grad_norm = Some(norm);
        }
    }
    let filter = smc_step(cloud, model, prop, y, opts, run_root)?;
    Ok(AdaptDiag { filter, objective, grad_norm, sgd_steps_run: n_sgd })
}
