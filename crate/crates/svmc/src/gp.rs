//! Online learning of unknown latent dynamics with sparse Gaussian
//! processes.
//!
//! The transition function is modelled as `f(x) = x + g(x)` with
//! independent GP priors over each output of `g`, all sharing one kernel
//! and one fixed set of M inducing points on a regular grid. Each
//! particle carries its own belief over the inducing values: a mean
//! matrix `mu` (M × d) and one shared covariance `gamma` (M × M).
//!
//! With `a(x) = K_zz⁻¹ k_z(x)` the one-step transition marginalises to
//!
//! ```text
//! p(x_t | x_{0:t−1}) = N(x_{t−1} + muᵀa,  c + aᵀ(gamma + drift·I)a)
//! c = k(x,x) − k_zᵀ K_zz⁻¹ k_z + process_var
//! ```
//!
//! and after the step is accepted the belief absorbs the observed
//! transition with one rank-one conjugate update — O(M²) per step, so
//! the cost per step never grows with time. `drift · I` is added to
//! `gamma` once per accepted step, letting the belief track slowly
//! drifting dynamics instead of freezing.

use serde::{Deserialize, Serialize};

use crate::models::{Emission, InitialPrior, StepDist};
use crate::numerics::{Mat, PsdMat, RngStream, SquaredExpKernel};
use crate::proposal::Proposal;
use crate::smc::{step_core, ParticleCloud, StepOpts};
use crate::variational::{sgd_pass, AdaptDiag, Trainer};
use crate::{Error, Result};

/// Regular grid of inducing points covering a box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducingGrid {
    dim: usize,
    per_axis: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// `count() × dim`, row per point, last axis fastest.
    points: Vec<f64>,
}

impl InducingGrid {
    pub fn regular(lo: &[f64], hi: &[f64], per_axis: &[usize]) -> Result<Self> {
        let dim = lo.len();
        if hi.len() != dim || per_axis.len() != dim || dim == 0 {
            return Err(Error::dim("inducing grid: lo/hi/per_axis lengths must match"));
        }
        for k in 0..dim {
            if !(lo[k] < hi[k]) {
                return Err(Error::domain(format!("grid axis {k}: lo {} >= hi {}", lo[k], hi[k])));
            }
            if per_axis[k] < 2 {
                return Err(Error::Config("grid needs at least 2 points per axis".into()));
            }
        }
        let count: usize = per_axis.iter().product();
        let mut points = Vec::with_capacity(count * dim);
        for mut idx in 0..count {
            let mut coords = vec![0.0; dim];
            for k in (0..dim).rev() {
                let i = idx % per_axis[k];
                idx /= per_axis[k];
                coords[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis[k] - 1) as f64;
            }
            points.extend_from_slice(&coords);
        }
        Ok(InducingGrid { dim, per_axis: per_axis.to_vec(), lo: lo.to_vec(), hi: hi.to_vec(), points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn per_axis(&self) -> &[usize] {
        &self.per_axis
    }
}

/// One particle's posterior over the inducing values of `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpBelief {
    /// M × d mean of the inducing values, one column per state dimension.
    pub mu: Mat,
    /// M × M covariance shared across state dimensions.
    pub gamma: Mat,
}

/// Moments of the GP-marginalised transition at one point.
#[derive(Debug, Clone)]
pub struct GpPredict {
    pub mean: Vec<f64>,
    pub var: f64,
    /// `K_zz⁻¹ k_z(x)` — exposed for tests and the belief update.
    pub alpha: Vec<f64>,
    /// Residual variance `c` (kernel tail + process noise).
    pub resid_var: f64,
}

/// The GP transition model shared by all particles: grid, kernel, and
/// noise scales, with the inducing Gram factor cached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpDynamics {
    pub grid: InducingGrid,
    pub kernel: SquaredExpKernel,
    /// Process noise variance added to every transition.
    pub process_var: f64,
    /// Variance added to `gamma` once per accepted step (0 = static dynamics).
    pub drift_var: f64,
    #[serde(skip, default)]
    kzz: Option<PsdMat>,
}

impl GpDynamics {
    pub fn new(
        grid: InducingGrid,
        kernel: SquaredExpKernel,
        process_var: f64,
        drift_var: f64,
    ) -> Result<Self> {
        if !(process_var > 0.0) || !process_var.is_finite() {
            return Err(Error::domain(format!("process_var {process_var}")));
        }
        if drift_var < 0.0 || !drift_var.is_finite() {
            return Err(Error::domain(format!("drift_var {drift_var}")));
        }
        let mut gp = GpDynamics { grid, kernel, process_var, drift_var, kzz: None };
        gp.refresh()?;
        Ok(gp)
    }

    /// Rebuilds the cached Gram factor (needed after deserialisation).
    pub fn refresh(&mut self) -> Result<()> {
        let gram = self.kernel.gram(self.grid.points(), self.grid.dim());
        self.kzz = Some(PsdMat::cholesky(gram)?);
        Ok(())
    }

    fn kzz(&self) -> &PsdMat {
        self.kzz.as_ref().expect("GpDynamics::refresh not called")
    }

    pub fn state_dim(&self) -> usize {
        self.grid.dim()
    }

    /// Fresh belief: zero mean, prior covariance `K_zz`.
    pub fn init_belief(&self) -> GpBelief {
        GpBelief {
            mu: Mat::zeros(self.grid.count(), self.grid.dim()),
            gamma: self.kzz().mat().clone(),
        }
    }

    /// Marginal transition moments at `x` under `belief`.
    pub fn predict(&self, belief: &GpBelief, x: &[f64]) -> GpPredict {
        let kz = self.kernel.cross(self.grid.points(), self.grid.dim(), x);
        let alpha = self.kzz().solve(&kz);
        let c = (self.kernel.variance - crate::numerics::dot(&kz, &alpha) + self.process_var)
            .max(1e-12);
        let mut mean = belief.mu.matvec_t(&alpha);
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += xi;
        }
        let ga = belief.gamma.matvec(&alpha);
        let var = c
            + crate::numerics::dot(&alpha, &ga)
            + self.drift_var * crate::numerics::dot(&alpha, &alpha);
        GpPredict { mean, var, alpha, resid_var: c }
    }

    /// Absorbs one observed transition `x_prev → x_new` into `belief`:
    /// drift inflation followed by a rank-one conjugate update. O(M²).
    pub fn update(&self, belief: &mut GpBelief, x_prev: &[f64], x_new: &[f64]) {
        let kz = self.kernel.cross(self.grid.points(), self.grid.dim(), x_prev);
        let alpha = self.kzz().solve(&kz);
        let c = (self.kernel.variance - crate::numerics::dot(&kz, &alpha) + self.process_var)
            .max(1e-12);

        if self.drift_var > 0.0 {
            belief.gamma.add_diag(self.drift_var);
        }
        let b = belief.gamma.matvec(&alpha); // (gamma + drift I) a
        let denom = c + crate::numerics::dot(&alpha, &b);

        // Mean: mu_d += b (r_d − aᵀ mu_d) / denom for each output dim d.
        let proj = belief.mu.matvec_t(&alpha);
        let gain: Vec<f64> = (0..self.grid.dim())
            .map(|dd| (x_new[dd] - x_prev[dd] - proj[dd]) / denom)
            .collect();
        belief.mu.add_outer(1.0, &b, &gain);

        // Covariance: gamma −= b bᵀ / denom, kept symmetric.
        belief.gamma.add_outer(-1.0 / denom, &b, &b);
        belief.gamma.symmetrize();
    }
}

/// State-space model with GP dynamics: the learned transition plus a
/// parametric emission and initial prior.
#[derive(Debug, Clone)]
pub struct GpSsm {
    pub gp: GpDynamics,
    pub emission: Emission,
    pub prior: InitialPrior,
}

impl GpSsm {
    pub fn new(gp: GpDynamics, emission: Emission, prior: InitialPrior) -> Result<Self> {
        if gp.state_dim() != emission.state_dim() || gp.state_dim() != prior.mean.len() {
            return Err(Error::dim(format!(
                "gp dim {} vs emission state dim {} vs prior dim {}",
                gp.state_dim(),
                emission.state_dim(),
                prior.mean.len()
            )));
        }
        Ok(GpSsm { gp, emission, prior })
    }

    pub fn init_cloud(&self, n: usize, run_root: &RngStream) -> Result<ParticleCloud<GpBelief>> {
        let belief = self.gp.init_belief();
        ParticleCloud::init_with_aux(n, &self.prior, || belief.clone(), run_root)
    }
}

/// One adaptive filtering step under GP dynamics: proposal adaptation
/// against the per-particle marginal transitions, one filtering pass, and
/// a conjugate belief update per surviving particle.
pub fn svmc_gp_step(
    cloud: &mut ParticleCloud<GpBelief>,
    ssm: &mut GpSsm,
    prop: &mut Proposal,
    trainer: &mut Trainer,
    y: &[f64],
    opts: &StepOpts,
    run_root: &RngStream,
) -> Result<AdaptDiag> {
    if y.len() != ssm.emission.obs_dim() {
        return Err(Error::dim(format!("observation len {} vs model {}", y.len(), ssm.emission.obs_dim())));
    }
    let n_sgd = if prop.is_trainable() { trainer.config.sgd_steps } else { 0 };
    let mut objective = None;
    let mut grad_norm = None;
    if n_sgd > 0 {
        let w_prev = cloud.normalized_weights()?;
        let layout = trainer.layout;
        for k in 0..n_sgd {
            let mut g = vec![0.0; layout.total()];
            let gp = &ssm.gp;
            let obj = sgd_pass(
                cloud,
                &w_prev,
                |i, xp| {
                    let p = gp.predict(cloud.aux(i), xp);
                    StepDist::Iso { mean: p.mean, var: p.var }
                },
                &ssm.emission,
                None,
                trainer.config.train_emission,
                prop,
                y,
                k as u64,
                trainer.config.grad_particles,
                run_root,
                &layout,
                &mut g,
            )?;
            let norm = trainer.apply(&mut g, prop, None, Some(&mut ssm.emission))?;
            objective = Some(obj);
            grad_norm = Some(norm);
        }
    }

    let gp = &ssm.gp;
    let emission = &ssm.emission;
    let (out, filter) = step_core(
        cloud,
        |i, xp| {
            let p = gp.predict(cloud.aux(i), xp);
            StepDist::Iso { mean: p.mean, var: p.var }
        },
        |x| emission.logpdf(x, y).logp,
        prop,
        y,
        opts,
        run_root,
    )?;

    let prev_states: Vec<Vec<f64>> =
        filter.ancestors.iter().map(|&a| cloud.state(a).to_vec()).collect();
    cloud.apply(out);
    for i in 0..cloud.n() {
        let x_new = cloud.state(i).to_vec();
        ssm.gp.update(cloud.aux_mut(i), &prev_states[i], &x_new);
    }

    Ok(AdaptDiag { filter, objective, grad_norm, sgd_steps_run: n_sgd })
}

/// Weight-mixture one-step-ahead predictive moments of `f(x)` at a query
/// point: mean `Σ w̃ᵢ vᵢ` and covariance `Σ w̃ᵢ (sᵢ I + (vᵢ−μ)(vᵢ−μ)ᵀ)`.
pub fn predictive_mixture(
    cloud: &ParticleCloud<GpBelief>,
    gp: &GpDynamics,
    x: &[f64],
) -> Result<(Vec<f64>, Mat)> {
    Ok(mixture_moments(&cloud.normalized_weights()?, cloud.aux_all(), gp, x))
}

/// [`predictive_mixture`] on raw weights and beliefs (e.g. from a saved
/// snapshot rather than a live cloud). `weights` must be normalised.
pub fn mixture_moments(
    weights: &[f64],
    beliefs: &[GpBelief],
    gp: &GpDynamics,
    x: &[f64],
) -> (Vec<f64>, Mat) {
    let d = gp.state_dim();
    let preds: Vec<GpPredict> = beliefs.iter().map(|b| gp.predict(b, x)).collect();
    let mut mean = vec![0.0; d];
    for (wi, p) in weights.iter().zip(&preds) {
        crate::numerics::axpy(*wi, &p.mean, &mut mean);
    }
    let mut cov = Mat::zeros(d, d);
    let mut resid = vec![0.0; d];
    for (wi, p) in weights.iter().zip(&preds) {
        for k in 0..d {
            resid[k] = p.mean[k] - mean[k];
            cov.set(k, k, cov.get(k, k) + wi * p.var);
        }
        cov.add_outer(*wi, &resid, &resid);
    }
    (mean, cov)
}

/// Expected displacement `E[f(x)] − x` of the learned dynamics at `x`.
pub fn mean_velocity(cloud: &ParticleCloud<GpBelief>, gp: &GpDynamics, x: &[f64]) -> Result<Vec<f64>> {
    let (m, _) = predictive_mixture(cloud, gp, x)?;
    Ok(m.iter().zip(x).map(|(a, b)| a - b).collect())
}

/// Deterministic forecast from `x0`: iterates the mixture predictive mean
/// `steps` times. Returns `x_1 .. x_steps`.
pub fn rollout(
    cloud: &ParticleCloud<GpBelief>,
    gp: &GpDynamics,
    x0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(steps);
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let (m, _) = predictive_mixture(cloud, gp, &x)?;
        out.push(m.clone());
        x = m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::TrainConfig;
    use approx::assert_relative_eq;

    #[test]
    fn grid_layout_is_deterministic() {
        let g = InducingGrid::regular(&[0.0, -1.0], &[1.0, 1.0], &[2, 3]).unwrap();
        assert_eq!(g.count(), 6);
        assert_eq!(g.point(0), &[0.0, -1.0]);
        assert_eq!(g.point(1), &[0.0, 0.0]);
        assert_eq!(g.point(2), &[0.0, 1.0]);
        assert_eq!(g.point(3), &[1.0, -1.0]);
        assert_eq!(g.point(5), &[1.0, 1.0]);
        assert!(InducingGrid::regular(&[0.0], &[0.0], &[2]).is_err());
        assert!(InducingGrid::regular(&[0.0], &[1.0], &[1]).is_err());
    }

    #[test]
    fn predict_moments_match_hand_algebra() {
        // v = x + muᵀa and s = c + aᵀ gamma a, reconstructed by hand from
        // the exposed alpha and resid_var.
        let grid = InducingGrid::regular(&[-2.0], &[2.0], &[3]).unwrap();
        let kernel = SquaredExpKernel::new(1.0, 0.7).unwrap();
        let gp = GpDynamics::new(grid, kernel.clone(), 0.2, 0.0).unwrap();
        let mut belief = gp.init_belief();
        belief.mu.data_mut().copy_from_slice(&[0.4, -0.1, 0.9]);

        let x = [0.3];
        let p = gp.predict(&belief, &x);

        let kz = kernel.cross(gp.grid.points(), 1, &x);
        let kzz = PsdMat::cholesky(kernel.gram(gp.grid.points(), 1)).unwrap();
        let a = kzz.solve(&kz);
        for (ai, pi) in a.iter().zip(&p.alpha) {
            assert_relative_eq!(ai, pi, max_relative = 1e-12);
        }
        let c = kernel.variance - crate::numerics::dot(&kz, &a) + 0.2;
        assert_relative_eq!(p.resid_var, c, max_relative = 1e-12);
        let mu_a: f64 = (0..3).map(|m| belief.mu.get(m, 0) * a[m]).sum();
        assert_relative_eq!(p.mean[0], 0.3 + mu_a, max_relative = 1e-12);
        let ga = belief.gamma.matvec(&a);
        assert_relative_eq!(p.var, c + crate::numerics::dot(&a, &ga), max_relative = 1e-12);
    }

    #[test]
    fn rank_one_update_scalar_hand_case() {
        // Effective scalar model: gamma = 1, a = 1, c = 1, residual r = 1
        // ⇒ denom = 2, gamma' = 1 − 1/2 = 0.5, mu' = 0 + 1·(1 − 0)/2 = 0.5.
        // Realised with a 1-point-like grid as above; instead verify the
        // algebra on the real update with a 2-point grid by computing the
        // expected quantities from predict() internals.
        let grid = InducingGrid::regular(&[-2.0], &[2.0], &[2]).unwrap();
        let kernel = SquaredExpKernel::new(1.5, 1.0).unwrap();
        let gp = GpDynamics::new(grid, kernel, 0.3, 0.0).unwrap();
        let mut belief = gp.init_belief();

        let xp = [0.4];
        let x_new = [1.1];
        let before = gp.predict(&belief, &xp);
        let a = before.alpha.clone();
        let c = before.resid_var;
        let b = belief.gamma.matvec(&a);
        let denom = c + crate::numerics::dot(&a, &b);
        let r = x_new[0] - xp[0];
        let expect_mu: Vec<f64> = b.iter().map(|bi| bi * r / denom).collect();
        let mut expect_gamma = belief.gamma.clone();
        expect_gamma.add_outer(-1.0 / denom, &b, &b);

        gp.update(&mut belief, &xp, &x_new);
        for m in 0..2 {
            assert_relative_eq!(belief.mu.get(m, 0), expect_mu[m], max_relative = 1e-12);
            for mm in 0..2 {
                assert_relative_eq!(
                    belief.gamma.get(m, mm),
                    expect_gamma.get(m, mm),
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
        // Posterior mean now predicts part of the observed residual.
        let after = gp.predict(&belief, &xp);
        assert!(after.mean[0] > xp[0]);
        assert!(after.var < before.var, "observing a transition must shrink variance");
    }

    #[test]
    fn sequential_updates_match_batch_posterior() {
        let grid = InducingGrid::regular(&[-3.0], &[3.0], &[4]).unwrap();
        let kernel = SquaredExpKernel::new(1.2, 0.8).unwrap();
        let gp = GpDynamics::new(grid.clone(), kernel.clone(), 0.2, 0.0).unwrap();
        let m = grid.count();

        let transitions: Vec<([f64; 1], [f64; 1])> = vec![
            ([0.5], [0.9]),
            ([-1.2], [-0.8]),
            ([2.0], [1.6]),
            ([0.1], [0.4]),
            ([-2.5], [-2.0]),
            ([1.4], [1.9]),
        ];

        // Sequential conjugate updates.
        let mut belief = gp.init_belief();
        for (xp, xn) in &transitions {
            gp.update(&mut belief, xp, xn);
        }

        // Batch posterior of the equivalent Bayesian linear model:
        // precision = K_zz⁻¹ + Σ a aᵀ/c, mean = cov · Σ a r/c.
        let kzz = PsdMat::cholesky(kernel.gram(grid.points(), 1)).unwrap();
        let mut precision = Mat::zeros(m, m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let col = kzz.solve(&e);
            for i in 0..m {
                precision.set(i, j, col[i]);
            }
        }
        precision.symmetrize();
        let mut rhs = vec![0.0; m];
        for (xp, xn) in &transitions {
            let kz = kernel.cross(grid.points(), 1, xp);
            let a = kzz.solve(&kz);
            let c = (kernel.variance - crate::numerics::dot(&kz, &a) + 0.2).max(1e-12);
            precision.add_outer(1.0 / c, &a, &a);
            crate::numerics::axpy((xn[0] - xp[0]) / c, &a, &mut rhs);
        }
        precision.symmetrize();
        let prec = PsdMat::cholesky(precision).unwrap();
        let batch_mu = prec.solve(&rhs);
        let mut batch_gamma = Mat::zeros(m, m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let col = prec.solve(&e);
            for i in 0..m {
                batch_gamma.set(i, j, col[i]);
            }
        }

        for i in 0..m {
            assert_relative_eq!(belief.mu.get(i, 0), batch_mu[i], epsilon = 1e-8);
            for j in 0..m {
                assert_relative_eq!(belief.gamma.get(i, j), batch_gamma.get(i, j), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn drift_inflates_predictive_variance() {
        let grid = InducingGrid::regular(&[-2.0, -2.0], &[2.0, 2.0], &[3, 3]).unwrap();
        let kernel = SquaredExpKernel::new(1.0, 1.0).unwrap();
        let gp0 = GpDynamics::new(grid.clone(), kernel.clone(), 0.1, 0.0).unwrap();
        let gp1 = GpDynamics::new(grid, kernel, 0.1, 0.05).unwrap();
        let b = gp0.init_belief();
        let x = [0.3, -0.7];
        assert!(gp1.predict(&b, &x).var > gp0.predict(&b, &x).var);
    }

    #[test]
    fn fresh_belief_rollout_stays_at_identity() {
        // mu = 0 ⇒ E[f(x)] = x: the prior dynamics are a standstill.
        let grid = InducingGrid::regular(&[-1.0, -1.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let gp = GpDynamics::new(grid, SquaredExpKernel::new(0.8, 1.0).unwrap(), 0.05, 0.0).unwrap();
        let emission =
            Emission::gaussian(Mat::identity(2), PsdMat::isotropic(2, 0.1).unwrap()).unwrap();
        let ssm = GpSsm::new(gp, emission, InitialPrior::standard(2)).unwrap();
        let cloud = ssm.init_cloud(8, &RngStream::root(1)).unwrap();
        let path = rollout(&cloud, &ssm.gp, &[0.4, -0.2], 5).unwrap();
        for x in path {
            assert_relative_eq!(x[0], 0.4, epsilon = 1e-12);
            assert_relative_eq!(x[1], -0.2, epsilon = 1e-12);
        }
        let v = mean_velocity(&cloud, &ssm.gp, &[0.4, -0.2]).unwrap();
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gp_filter_step_runs_and_is_deterministic() {
        let grid = InducingGrid::regular(&[-3.0, -3.0], &[3.0, 3.0], &[4, 4]).unwrap();
        let gp = GpDynamics::new(grid, SquaredExpKernel::new(1.5, 1.0).unwrap(), 0.05, 1e-4).unwrap();
        let emission =
            Emission::gaussian(Mat::identity(2), PsdMat::isotropic(2, 0.1).unwrap()).unwrap();
        let ssm = GpSsm::new(gp, emission, InitialPrior::standard(2)).unwrap();
        let ys = vec![vec![0.3, 0.1], vec![0.5, -0.1], vec![0.6, -0.4], vec![0.4, -0.6]];

        let run = |seed: u64, ssm: &mut GpSsm| {
            let root = RngStream::root(seed);
            let mut cloud = ssm.init_cloud(24, &root).unwrap();
            let mut prop = Proposal::affine(2);
            let cfg = TrainConfig { sgd_steps: 3, learning_rate: 0.02, ..TrainConfig::default() };
            let mut trainer = Trainer::new(&prop, 0, ssm.emission.param_len(), cfg).unwrap();
            let mut total = 0.0;
            for y in &ys {
                let d = svmc_gp_step(
                    &mut cloud,
                    ssm,
                    &mut prop,
                    &mut trainer,
                    y,
                    &StepOpts::default(),
                    &root,
                )
                .unwrap();
                total += d.filter.log_like_increment;
                assert!(d.filter.log_like_increment.is_finite());
            }
            (total, cloud.state(0).to_vec())
        };
        let (t1, s1) = run(7, &mut ssm.clone());
        let (t2, s2) = run(7, &mut ssm.clone());
        assert_eq!(t1, t2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn beliefs_learn_a_simple_contraction() {
        // True dynamics x' = 0.5x: after many observed transitions the
        // mixture mean at a probe point should move toward 0.5·x.
        let grid = InducingGrid::regular(&[-2.0], &[2.0], &[6]).unwrap();
        let gp = GpDynamics::new(grid, SquaredExpKernel::new(1.0, 1.0).unwrap(), 0.01, 0.0).unwrap();
        let mut belief = gp.init_belief();
        let mut x = 1.5f64;
        for _ in 0..60 {
            let xn = 0.5 * x;
            gp.update(&mut belief, &[x], &[xn]);
            x = if x < 0.05 { 1.5 } else { xn }; // keep revisiting the domain
        }
        let p = gp.predict(&belief, &[1.0]);
        assert_relative_eq!(p.mean[0], 0.5, epsilon = 0.15);
    }
}
