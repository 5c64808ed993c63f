//! Sequential Monte Carlo: the particle cloud, resampling, and one
//! propose–weight–resample step.
//!
//! Weights are kept in the log domain and never normalised in place; the
//! marginal-likelihood increment at each step is
//! `logΣexp(new) − logΣexp(carried)`, which telescopes to an unbiased
//! estimate of `p(y_{1:t})` under any resampling schedule.
//!
//! Randomness: every step derives child streams from the run root by the
//! canonical path `[step, phase, particle]` (see [`crate::numerics::rng`]),
//! so results do not depend on thread count or iteration order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{StateSpaceModel, StepDist};
use crate::numerics::rng::tag;
use crate::numerics::{logsumexp, Mat, RngStream};
use crate::proposal::Proposal;
use crate::{Error, Result};

/// Particle count below which the per-particle loop stays serial; above
/// it the loop is parallelised. Outputs are identical either way.
const PAR_CUTOFF: usize = 512;

/// Weighted particle approximation of the filtering distribution.
/// `A` is a per-particle payload (e.g. a GP belief) that follows its
/// particle through resampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleCloud<A = ()> {
    dim: usize,
    states: Vec<f64>, // n × dim, row per particle
    log_weights: Vec<f64>,
    aux: Vec<A>,
    step: usize,
}

impl<A: Clone> ParticleCloud<A> {
    /// Samples `n` particles from the initial prior with uniform weights.
    pub fn init_with_aux(
        n: usize,
        prior: &crate::models::InitialPrior,
        mut make_aux: impl FnMut() -> A,
        run_root: &RngStream,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        let dim = prior.mean.len();
        let mut states = vec![0.0; n * dim];
        for i in 0..n {
            let mut r = run_root.derive(&[0, tag::INIT, i as u64]);
            let x = prior.sample(&mut r);
            states[i * dim..(i + 1) * dim].copy_from_slice(&x);
        }
        Ok(ParticleCloud {
            dim,
            states,
            log_weights: vec![0.0; n],
            aux: (0..n).map(|_| make_aux()).collect(),
            step: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.log_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observations absorbed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn aux(&self, i: usize) -> &A {
        &self.aux[i]
    }

    pub fn aux_mut(&mut self, i: usize) -> &mut A {
        &mut self.aux[i]
    }

    pub fn aux_all(&self) -> &[A] {
        &self.aux
    }

    /// Flat row-major particle states, `n × dim`.
    pub fn flat_states(&self) -> &[f64] {
        &self.states
    }

    /// Self-normalised weights; errors if every weight has collapsed.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        normalize_log_weights(&self.log_weights).map_err(|_| Error::WeightCollapse { step: self.step })
    }

    /// Effective sample size `1/Σ w̃²` of the current weights.
    pub fn ess(&self) -> Result<f64> {
        Ok(ess_of(&self.normalized_weights()?))
    }

    /// Weighted mean and covariance of the particle approximation.
    pub fn filtered_moments(&self) -> Result<(Vec<f64>, Mat)> {
        let w = self.normalized_weights()?;
        let d = self.dim;
        let mut mean = vec![0.0; d];
        for i in 0..self.n() {
            crate::numerics::axpy(w[i], self.state(i), &mut mean);
        }
        let mut cov = Mat::zeros(d, d);
        let mut resid = vec![0.0; d];
        for i in 0..self.n() {
            let x = self.state(i);
            for k in 0..d {
                resid[k] = x[k] - mean[k];
            }
            cov.add_outer(w[i], &resid, &resid);
        }
        Ok((mean, cov))
    }

    pub(crate) fn apply(&mut self, out: StepOutput) {
        let new_aux = out.ancestors.iter().map(|&a| self.aux[a].clone()).collect();
        self.states = out.states;
        self.log_weights = out.log_weights;
        self.aux = new_aux;
        self.step += 1;
    }
}

impl ParticleCloud<()> {
    pub fn init(n: usize, prior: &crate::models::InitialPrior, run_root: &RngStream) -> Result<Self> {
        Self::init_with_aux(n, prior, || (), run_root)
    }
}

/// Normalises log weights into probabilities. Errors when all weights are
/// −∞ or any is NaN/+∞.
pub fn normalize_log_weights(lw: &[f64]) -> Result<Vec<f64>> {
    let lse = logsumexp(lw)?;
    Ok(lw.iter().map(|l| (l - lse).exp()).collect())
}

pub fn ess_of(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// How ancestors are drawn when resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleScheme {
    /// Independent categorical draws.
    Multinomial,
    /// One uniform offset, stratified positions; each ancestor count is
    /// within one of its expectation.
    Systematic,
}

/// Independent categorical ancestor draws (inverse CDF per draw).
pub fn multinomial_ancestors(weights: &[f64], n_draw: usize, rng: &mut RngStream) -> Vec<usize> {
    let cum = cumulative(weights);
    let last = weights.len() - 1;
    (0..n_draw)
        .map(|_| {
            let u = rng.next_uniform() * cum[last];
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// Systematic resampling: positions `(k + u)/n` for one shared `u`.
pub fn systematic_ancestors(weights: &[f64], n_draw: usize, rng: &mut RngStream) -> Vec<usize> {
    let cum = cumulative(weights);
    let total = cum[weights.len() - 1];
    let u = rng.next_uniform();
    let mut out = Vec::with_capacity(n_draw);
    let mut j = 0;
    for k in 0..n_draw {
        let pos = (k as f64 + u) / n_draw as f64 * total;
        while j < weights.len() - 1 && cum[j] <= pos {
            j += 1;
        }
        out.push(j);
    }
    out
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        debug_assert!(w >= 0.0);
        acc += w;
        cum.push(acc);
    }
    cum
}

/// Options for one filtering step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepOpts {
    pub scheme: ResampleScheme,
    /// Resample when `ESS < threshold · N`; a threshold of 1.0 (or more)
    /// means resample every step.
    pub ess_threshold: f64,
}

impl Default for StepOpts {
    fn default() -> Self {
        StepOpts { scheme: ResampleScheme::Multinomial, ess_threshold: 1.0 }
    }
}

/// Per-step filter diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDiag {
    pub step: usize,
    /// ESS of the incoming weights, before any resampling.
    pub ess_before: f64,
    pub resampled: bool,
    /// ESS of the outgoing weights.
    pub ess_after: f64,
    /// log p̂(y_t | y_{1:t−1}).
    pub log_like_increment: f64,
    pub ancestors: Vec<usize>,
}

pub(crate) struct StepOutput {
    pub states: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub ancestors: Vec<usize>,
}

/// The propose–weight part of a step, generic over the per-particle
/// transition law. Returns the new cloud contents and diagnostics without
/// mutating `cloud`; the caller applies them (and any payload updates).
pub(crate) fn step_core<'q, A, F, E>(
    cloud: &ParticleCloud<A>,
    trans: F,
    emis: E,
    prop: &Proposal,
    y: &[f64],
    opts: &StepOpts,
    run_root: &RngStream,
) -> Result<(StepOutput, StepDiag)>
where
    A: Clone + Sync,
    F: Fn(usize, &[f64]) -> StepDist<'q> + Sync,
    E: Fn(&[f64]) -> f64 + Sync,
    Proposal: Sync,
{
    let n = cloud.n();
    let d = cloud.dim();
    let t = (cloud.step + 1) as u64;

    let w_prev = cloud.normalized_weights()?;
    let ess_before = ess_of(&w_prev);
    let resample = opts.ess_threshold >= 1.0 || ess_before < opts.ess_threshold * n as f64;

    let (ancestors, carried_lw): (Vec<usize>, Vec<f64>) = if resample {
        let mut r = run_root.derive(&[t, tag::RESAMPLE]);
        let anc = match opts.scheme {
            ResampleScheme::Multinomial => multinomial_ancestors(&w_prev, n, &mut r),
            ResampleScheme::Systematic => systematic_ancestors(&w_prev, n, &mut r),
        };
        (anc, vec![0.0; n])
    } else {
        ((0..n).collect(), cloud.log_weights.clone())
    };

    let one = |i: usize| -> (Vec<f64>, f64) {
        let a = ancestors[i];
        let x_prev = cloud.state(a);
        let dist = trans(a, x_prev);
        let mut r = run_root.derive(&[t, tag::PROPOSE, i as u64]);
        let drawn = prop.sample(&dist, y, &mut r);
        let (log_trans, _) = dist.logpdf(&drawn.x);
        let log_emis = emis(&drawn.x);
        // Grouped so the bootstrap case cancels exactly to the emission term.
        let logv = log_emis + (log_trans - drawn.log_r);
        (drawn.x, logv)
    };

    let results: Vec<(Vec<f64>, f64)> = if n >= PAR_CUTOFF {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    };

    let mut states = vec![0.0; n * d];
    let mut log_weights = vec![0.0; n];
    for (i, (x, logv)) in results.into_iter().enumerate() {
        states[i * d..(i + 1) * d].copy_from_slice(&x);
        log_weights[i] = carried_lw[i] + logv;
    }

    let lse_carried = logsumexp(&carried_lw).expect("carried weights are finite");
    let lse_new = logsumexp(&log_weights).map_err(|_| Error::WeightCollapse { step: t as usize })?;
    let w_new = normalize_log_weights(&log_weights)?;

    let diag = StepDiag {
        step: t as usize,
        ess_before,
        resampled: resample,
        ess_after: ess_of(&w_new),
        log_like_increment: lse_new - lse_carried,
        ancestors: ancestors.clone(),
    };
    Ok((StepOutput { states, log_weights, ancestors }, diag))
}

/// One particle-filter step for a parametric state-space model:
/// optionally resample, propose from `prop`, and reweigh against `y`.
pub fn smc_step(
    cloud: &mut ParticleCloud<()>,
    model: &StateSpaceModel,
    prop: &Proposal,
    y: &[f64],
    opts: &StepOpts,
    run_root: &RngStream,
) -> Result<StepDiag> {
    if y.len() != model.obs_dim() {
        return Err(Error::dim(format!("observation len {} vs model {}", y.len(), model.obs_dim())));
    }
    let (out, diag) = step_core(
        cloud,
        |_, x_prev| StepDist::Full { mean: model.dynamics.mean.eval(x_prev), cov: &model.dynamics.noise },
        |x| model.emission.logpdf(x, y).logp,
        prop,
        y,
        opts,
        run_root,
    )?;
    cloud.apply(out);
    Ok(diag)
}

/// Running log marginal likelihood.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MarginalLik {
    pub per_step: Vec<f64>,
    pub total: f64,
}

impl MarginalLik {
    pub fn push(&mut self, increment: f64) {
        self.per_step.push(increment);
        self.total += increment;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Dynamics, DynamicsMean, Emission, InitialPrior};
    use crate::numerics::PsdMat;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lds_1d() -> StateSpaceModel {
        let a = Mat::new(1, 1, vec![0.9]).unwrap();
        let q = PsdMat::isotropic(1, 1.0).unwrap();
        let r = PsdMat::isotropic(1, 1.0).unwrap();
        StateSpaceModel::new(
            Dynamics::new(DynamicsMean::Linear { a }, q).unwrap(),
            Emission::gaussian(Mat::identity(1), r).unwrap(),
            InitialPrior::standard(1),
        )
        .unwrap()
    }

    #[test]
    fn bootstrap_weight_increment_is_exactly_the_emission() {
        let model = lds_1d();
        let root = RngStream::root(11);
        let mut cloud = ParticleCloud::init(64, &model.prior, &root).unwrap();
        let before = cloud.log_weights().to_vec();
        let y = [0.4];
        let diag = smc_step(&mut cloud, &model, &Proposal::Bootstrap, &y, &StepOpts::default(), &root)
            .unwrap();
        assert!(diag.resampled);
        for i in 0..cloud.n() {
            let emis = model.emission.logpdf(cloud.state(i), &y).logp;
            // carried weight is 0 after resampling, so the new log weight
            // must equal the emission term bit-for-bit.
            assert_eq!(cloud.log_weights()[i], emis);
        }
        assert_eq!(before.len(), cloud.n());
    }

    #[test]
    fn step_is_deterministic_and_seed_sensitive() {
        let model = lds_1d();
        let ys: Vec<Vec<f64>> = vec![vec![0.1], vec![-0.3], vec![0.8]];
        let run = |seed: u64| -> (Vec<f64>, f64) {
            let root = RngStream::root(seed);
            let mut cloud = ParticleCloud::init(32, &model.prior, &root).unwrap();
            let mut ml = MarginalLik::default();
            for y in &ys {
                let d = smc_step(&mut cloud, &model, &Proposal::Bootstrap, y, &StepOpts::default(), &root)
                    .unwrap();
                ml.push(d.log_like_increment);
            }
            (cloud.states.clone(), ml.total)
        };
        let (s1, l1) = run(5);
        let (s2, l2) = run(5);
        let (s3, l3) = run(6);
        assert_eq!(s1, s2);
        assert_eq!(l1, l2);
        assert!(s1 != s3 || l1 != l3);
    }

    #[test]
    fn adaptive_threshold_skips_resampling_at_high_ess() {
        let model = lds_1d();
        let root = RngStream::root(2);
        let mut cloud = ParticleCloud::init(128, &model.prior, &root).unwrap();
        let opts = StepOpts { scheme: ResampleScheme::Multinomial, ess_threshold: 0.1 };
        // First step: incoming weights are uniform, ESS = N, no resample.
        let d = smc_step(&mut cloud, &model, &Proposal::Bootstrap, &[0.2], &opts, &root).unwrap();
        assert!(!d.resampled);
        assert_relative_eq!(d.ess_before, 128.0, max_relative = 1e-12);
        assert!(d.ancestors.iter().enumerate().all(|(i, &a)| i == a));
    }

    #[test]
    fn filtered_moments_match_hand_weights() {
        // Two particles at −1 and 3 with weights 0.25/0.75:
        // mean 2, var 0.25·9 + 0.75·1 = 3.
        let mut cloud = ParticleCloud::<()> {
            dim: 1,
            states: vec![-1.0, 3.0],
            log_weights: vec![0.25f64.ln(), 0.75f64.ln()],
            aux: vec![(), ()],
            step: 0,
        };
        let (m, c) = cloud.filtered_moments().unwrap();
        assert_relative_eq!(m[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(c.get(0, 0), 3.0, max_relative = 1e-12);
        cloud.log_weights = vec![f64::NEG_INFINITY; 2];
        assert!(matches!(cloud.ess(), Err(Error::WeightCollapse { .. })));
    }

    #[test]
    fn multinomial_counts_track_weights() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let mut rng = RngStream::root(99);
        let n = 40_000;
        let anc = multinomial_ancestors(&w, n, &mut rng);
        let mut counts = [0usize; 4];
        for a in anc {
            counts[a] += 1;
        }
        for (c, wi) in counts.iter().zip(&w) {
            let freq = *c as f64 / n as f64;
            // ~4 sigma of a binomial proportion at n=40k
            assert!((freq - wi).abs() < 4.0 * (wi * (1.0 - wi) / n as f64).sqrt() + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn systematic_counts_are_within_one_of_expectation(
            raw in proptest::collection::vec(0.01f64..10.0, 2..40),
            seed in 0u64..5000,
        ) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let n = 64usize;
            let mut rng = RngStream::root(seed);
            let anc = systematic_ancestors(&w, n, &mut rng);
            prop_assert_eq!(anc.len(), n);
            let mut counts = vec![0usize; w.len()];
            for a in &anc {
                counts[*a] += 1;
            }
            for (c, wi) in counts.iter().zip(&w) {
                let expect = n as f64 * wi;
                prop_assert!((*c as f64) >= expect.floor() - 1e-9);
                prop_assert!((*c as f64) <= expect.ceil() + 1e-9);
            }
            // ancestors are sorted for systematic resampling
            prop_assert!(anc.windows(2).all(|p| p[0] <= p[1]));
        }

        #[test]
        fn normalisation_and_ess_invariants(
            lw in proptest::collection::vec(-700.0f64..700.0, 1..200),
        ) {
            let w = normalize_log_weights(&lw).unwrap();
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let e = ess_of(&w);
            prop_assert!(e >= 1.0 - 1e-9);
            prop_assert!(e <= w.len() as f64 * (1.0 + 1e-9));
        }
    }
}
