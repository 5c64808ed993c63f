//! Proposal distributions for the particle filters.
//!
//! A proposal maps the per-particle transition mean ("feature") and the
//! current observation to a diagonal Gaussian over the next state. Draws
//! are reparameterised — `x = m + σ ⊙ ε` with recorded noise ε — so the
//! per-step objective can be differentiated through the draw. Backprop is
//! written out by hand; each family records the forward values it needs
//! on a small tape.
//!
//! Three families:
//! * **Bootstrap** — propose from the transition law itself. Not
//!   trainable; the transition and proposal terms in the importance
//!   weight cancel exactly.
//! * **Affine** — `m = mu + beta ⊙ f`, `σ = exp(s)`, all per-coordinate.
//!   At its initial parameters (mu=0, beta=1, s=0) it matches a
//!   unit-noise bootstrap proposal.
//! * **Mlp** — one tanh hidden layer over `[f, y]`, a residual mean head
//!   `m = f + W_m h + b_m`, and a log-scale head. Heads start at zero, so
//!   the initial proposal is `N(f, I)` regardless of the hidden weights.

use serde::{Deserialize, Serialize};

use crate::models::StepDist;
use crate::numerics::density::LN_2PI;
use crate::numerics::{Mat, RngStream};
use crate::{Error, Result};

/// Hard lower bound on proposal standard deviations. When the exp-scale
/// falls below this the value is clamped and its gradient is zero.
pub const SCALE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineProposal {
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_scale: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpProposal {
    pub state_dim: usize,
    pub obs_dim: usize,
    pub hidden: usize,
    /// Hidden layer: `hidden × (state_dim + obs_dim)`.
    pub w1: Mat,
    pub b1: Vec<f64>,
    /// Mean head (residual on the feature): `state_dim × hidden`.
    pub w_mean: Mat,
    pub b_mean: Vec<f64>,
    /// Log-scale head: `state_dim × hidden`.
    pub w_scale: Mat,
    pub b_scale: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Proposal {
    Bootstrap,
    Affine(AffineProposal),
    Mlp(MlpProposal),
}

/// Forward values recorded during a reparameterised draw.
#[derive(Debug, Clone)]
pub struct Tape {
    eps: Vec<f64>,
    sigma: Vec<f64>,
    detail: TapeDetail,
}

#[derive(Debug, Clone)]
enum TapeDetail {
    Bootstrap,
    Affine { feature: Vec<f64> },
    Mlp { input: Vec<f64>, hidden: Vec<f64>, raw_scale: Vec<f64> },
}

/// Result of one proposal draw.
#[derive(Debug, Clone)]
pub struct Draw {
    pub x: Vec<f64>,
    pub log_r: f64,
    pub tape: Tape,
}

impl Proposal {
    pub fn affine(dim: usize) -> Self {
        Proposal::Affine(AffineProposal {
            mu: vec![0.0; dim],
            beta: vec![1.0; dim],
            log_scale: vec![0.0; dim],
        })
    }

    /// MLP proposal with Xavier-initialised hidden weights (drawn from
    /// `rng`) and zero-initialised output heads.
    pub fn mlp(state_dim: usize, obs_dim: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let input = state_dim + obs_dim;
        let std = (1.0 / input as f64).sqrt();
        let w1 = Mat::from_fn(hidden, input, |_, _| std * rng.next_normal());
        Proposal::Mlp(MlpProposal {
            state_dim,
            obs_dim,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w_mean: Mat::zeros(state_dim, hidden),
            b_mean: vec![0.0; state_dim],
            w_scale: Mat::zeros(state_dim, hidden),
            b_scale: vec![0.0; state_dim],
        })
    }

    /// Sets the per-dimension output scale so that the untrained proposal
    /// draws with the given variances. With zero-initialised mean heads the
    /// proposal then starts out identical to the transition density it will
    /// be refined from (exactly so when that density is isotropic).
    pub fn init_scale_from_var(&mut self, var_diag: &[f64]) -> Result<()> {
        for &v in var_diag {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("proposal init variance {v}")));
            }
        }
        match self {
            Proposal::Bootstrap => Ok(()),
            Proposal::Affine(p) => {
                if var_diag.len() != p.log_scale.len() {
                    return Err(Error::dim("init_scale_from_var length mismatch"));
                }
                for (s, &v) in p.log_scale.iter_mut().zip(var_diag) {
                    *s = 0.5 * v.ln();
                }
                Ok(())
            }
            Proposal::Mlp(p) => {
                if var_diag.len() != p.b_scale.len() {
                    return Err(Error::dim("init_scale_from_var length mismatch"));
                }
                for (s, &v) in p.b_scale.iter_mut().zip(var_diag) {
                    *s = 0.5 * v.ln();
                }
                Ok(())
            }
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, Proposal::Bootstrap)
    }

    pub fn param_len(&self) -> usize {
        match self {
            Proposal::Bootstrap => 0,
            Proposal::Affine(p) => 3 * p.mu.len(),
            Proposal::Mlp(p) => {
                let input = p.state_dim + p.obs_dim;
                p.hidden * input + p.hidden + 2 * (p.state_dim * p.hidden + p.state_dim)
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Proposal::Bootstrap => Vec::new(),
            Proposal::Affine(p) => {
                let mut v = p.mu.clone();
                v.extend_from_slice(&p.beta);
                v.extend_from_slice(&p.log_scale);
                v
            }
            Proposal::Mlp(p) => {
                let mut v = p.w1.data().to_vec();
                v.extend_from_slice(&p.b1);
                v.extend_from_slice(p.w_mean.data());
                v.extend_from_slice(&p.b_mean);
                v.extend_from_slice(p.w_scale.data());
                v.extend_from_slice(&p.b_scale);
                v
            }
        }
    }

    pub fn set_params(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.param_len(), "proposal param length");
        match self {
            Proposal::Bootstrap => {}
            Proposal::Affine(p) => {
                let d = p.mu.len();
                p.mu.copy_from_slice(&v[..d]);
                p.beta.copy_from_slice(&v[d..2 * d]);
                p.log_scale.copy_from_slice(&v[2 * d..]);
            }
            Proposal::Mlp(p) => {
                let (h, di, d) = (p.hidden, p.state_dim + p.obs_dim, p.state_dim);
                let mut at = 0;
                p.w1.data_mut().copy_from_slice(&v[at..at + h * di]);
                at += h * di;
                p.b1.copy_from_slice(&v[at..at + h]);
                at += h;
                p.w_mean.data_mut().copy_from_slice(&v[at..at + d * h]);
                at += d * h;
                p.b_mean.copy_from_slice(&v[at..at + d]);
                at += d;
                p.w_scale.data_mut().copy_from_slice(&v[at..at + d * h]);
                at += d * h;
                p.b_scale.copy_from_slice(&v[at..at + d]);
            }
        }
    }

    /// Draws `x` given the transition law, the observation, and standard
    /// normal noise `eps` (one entry per state dimension).
    pub fn draw(&self, dist: &StepDist, y: &[f64], eps: &[f64]) -> Draw {
        let d = dist.dim();
        debug_assert_eq!(eps.len(), d);
        match self {
            Proposal::Bootstrap => {
                let x = dist.sample_with(eps);
                let (log_r, _) = dist.logpdf(&x);
                Draw {
                    x,
                    log_r,
                    tape: Tape {
                        eps: eps.to_vec(),
                        sigma: Vec::new(),
                        detail: TapeDetail::Bootstrap,
                    },
                }
            }
            Proposal::Affine(p) => {
                debug_assert_eq!(p.mu.len(), d);
                let f = dist.mean();
                let mut sigma = vec![0.0; d];
                let mut x = vec![0.0; d];
                let mut log_r = -0.5 * d as f64 * LN_2PI;
                for i in 0..d {
                    let m = p.mu[i] + p.beta[i] * f[i];
                    sigma[i] = p.log_scale[i].exp().max(SCALE_FLOOR);
                    x[i] = m + sigma[i] * eps[i];
                    log_r -= sigma[i].ln() + 0.5 * eps[i] * eps[i];
                }
                Draw {
                    x,
                    log_r,
                    tape: Tape {
                        eps: eps.to_vec(),
                        sigma,
                        detail: TapeDetail::Affine { feature: f.to_vec() },
                    },
                }
            }
            Proposal::Mlp(p) => {
                debug_assert_eq!(p.state_dim, d);
                debug_assert_eq!(p.obs_dim, y.len());
                let f = dist.mean();
                let mut input = Vec::with_capacity(d + y.len());
                input.extend_from_slice(f);
                input.extend_from_slice(y);
                let mut hidden = p.w1.matvec(&input);
                for (h, b) in hidden.iter_mut().zip(&p.b1) {
                    *h = (*h + b).tanh();
                }
                let mut m = p.w_mean.matvec(&hidden);
                for i in 0..d {
                    m[i] += p.b_mean[i] + f[i];
                }
                let mut raw = p.w_scale.matvec(&hidden);
                let mut sigma = vec![0.0; d];
                let mut x = vec![0.0; d];
                let mut log_r = -0.5 * d as f64 * LN_2PI;
                for i in 0..d {
                    raw[i] += p.b_scale[i];
                    sigma[i] = raw[i].exp().max(SCALE_FLOOR);
                    x[i] = m[i] + sigma[i] * eps[i];
                    log_r -= sigma[i].ln() + 0.5 * eps[i] * eps[i];
                }
                Draw {
                    x,
                    log_r,
                    tape: Tape {
                        eps: eps.to_vec(),
                        sigma,
                        detail: TapeDetail::Mlp { input, hidden, raw_scale: raw },
                    },
                }
            }
        }
    }

    /// Convenience wrapper drawing the noise from `rng`.
    pub fn sample(&self, dist: &StepDist, y: &[f64], rng: &mut RngStream) -> Draw {
        let mut eps = vec![0.0; dist.dim()];
        rng.fill_normal(&mut eps);
        self.draw(dist, y, &eps)
    }

    /// Reverse pass for one recorded draw.
    ///
    /// `gx_model` is ∂L/∂x from every term except the proposal density
    /// itself; `c_r` is ∂L/∂(log r) (−1 for the per-step objective). The
    /// total parameter gradient is accumulated into `g_params` (layout of
    /// [`Self::params`]) and the total feature gradient — both the mean
    /// head's dependence on `f` and the density's — into `g_feature`.
    pub fn backprop(
        &self,
        tape: &Tape,
        gx_model: &[f64],
        c_r: f64,
        g_params: &mut [f64],
        g_feature: &mut [f64],
    ) {
        debug_assert_eq!(g_params.len(), self.param_len());
        let (eps, sigma) = (&tape.eps, &tape.sigma);
        let d = eps.len();

        // Shared diagonal-Gaussian pieces:
        //   ∂ρ/∂x = −ε/σ, ∂ρ/∂m = ε/σ, ∂ρ/∂σ = (ε² − 1)/σ,
        //   ∂x/∂m = I, ∂x/∂σ = diag(ε).
        let family_grads = |g_m: &mut [f64], g_sigma: &mut [f64]| {
            for i in 0..d {
                let rho_x = -eps[i] / sigma[i];
                let gx_tot = gx_model[i] + c_r * rho_x;
                g_m[i] = gx_tot - c_r * rho_x; // = gx_model[i], kept in this form on purpose
                g_sigma[i] = eps[i] * gx_tot + c_r * (eps[i] * eps[i] - 1.0) / sigma[i];
            }
        };

        match (self, &tape.detail) {
            (Proposal::Bootstrap, TapeDetail::Bootstrap) => {
                // Not trainable; transition and proposal terms cancel, so
                // there is nothing to propagate.
            }
            (Proposal::Affine(p), TapeDetail::Affine { feature }) => {
                let mut g_m = vec![0.0; d];
                let mut g_sigma = vec![0.0; d];
                family_grads(&mut g_m, &mut g_sigma);
                for i in 0..d {
                    g_params[i] += g_m[i];
                    g_params[d + i] += feature[i] * g_m[i];
                    if p.log_scale[i].exp() >= SCALE_FLOOR {
                        g_params[2 * d + i] += sigma[i] * g_sigma[i];
                    }
                    g_feature[i] += p.beta[i] * g_m[i];
                }
            }
            (Proposal::Mlp(p), TapeDetail::Mlp { input, hidden, raw_scale }) => {
                let mut g_m = vec![0.0; d];
                let mut g_sigma = vec![0.0; d];
                family_grads(&mut g_m, &mut g_sigma);
                let g_raw: Vec<f64> = (0..d)
                    .map(|i| if raw_scale[i].exp() >= SCALE_FLOOR { sigma[i] * g_sigma[i] } else { 0.0 })
                    .collect();

                let (h, di) = (p.hidden, p.state_dim + p.obs_dim);
                let mut at = h * di + h; // param offsets past (w1, b1)
                // Mean head: m = f + W_m h + b_m.
                for i in 0..d {
                    crate::numerics::axpy(g_m[i], hidden, &mut g_params[at + i * h..at + (i + 1) * h]);
                }
                at += d * h;
                for i in 0..d {
                    g_params[at + i] += g_m[i];
                }
                at += d;
                // Scale head.
                for i in 0..d {
                    crate::numerics::axpy(g_raw[i], hidden, &mut g_params[at + i * h..at + (i + 1) * h]);
                }
                at += d * h;
                for i in 0..d {
                    g_params[at + i] += g_raw[i];
                }

                // Through the hidden layer.
                let mut g_h = p.w_mean.matvec_t(&g_m);
                let g_h2 = p.w_scale.matvec_t(&g_raw);
                for (a, b) in g_h.iter_mut().zip(&g_h2) {
                    *a += b;
                }
                let g_pre: Vec<f64> =
                    g_h.iter().zip(hidden).map(|(g, hj)| g * (1.0 - hj * hj)).collect();
                for j in 0..h {
                    crate::numerics::axpy(g_pre[j], input, &mut g_params[j * di..(j + 1) * di]);
                }
                let b1_off = h * di;
                for j in 0..h {
                    g_params[b1_off + j] += g_pre[j];
                }
                let g_input = p.w1.matvec_t(&g_pre);

                // Residual mean path plus the hidden-layer input path.
                for i in 0..d {
                    g_feature[i] += g_m[i] + g_input[i];
                }
            }
            _ => unreachable!("tape does not match proposal family"),
        }
    }
}

/// Adds `delta` to the proposal parameters, rejecting non-finite results.
pub fn apply_param_step(prop: &mut Proposal, delta: &[f64]) -> Result<()> {
    let mut p = prop.params();
    if p.len() != delta.len() {
        return Err(Error::dim("proposal update length"));
    }
    for (pi, di) in p.iter_mut().zip(delta) {
        *pi += di;
        if !pi.is_finite() {
            return Err(Error::domain("proposal parameter became non-finite"));
        }
    }
    prop.set_params(&p);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::PsdMat;
    use approx::assert_relative_eq;

    // Surrogate loss with the same structure as the per-step objective:
    // L = aᵀx + c_r·log r, for a fixed coefficient vector a.
    fn surrogate(prop: &Proposal, dist: &StepDist, y: &[f64], eps: &[f64], a: &[f64], c_r: f64) -> f64 {
        let d = prop.draw(dist, y, eps);
        crate::numerics::dot(a, &d.x) + c_r * d.log_r
    }

    fn fd_params(
        prop: &Proposal,
        dist: &StepDist,
        y: &[f64],
        eps: &[f64],
        a: &[f64],
        c_r: f64,
    ) -> Vec<f64> {
        let p0 = prop.params();
        let mut g = vec![0.0; p0.len()];
        for i in 0..p0.len() {
            let h = 1e-6 * p0[i].abs().max(1.0);
            let mut p = prop.clone();
            let mut v = p0.clone();
            v[i] += h;
            p.set_params(&v);
            let up = surrogate(&p, dist, y, eps, a, c_r);
            v[i] = p0[i] - h;
            p.set_params(&v);
            let dn = surrogate(&p, dist, y, eps, a, c_r);
            g[i] = (up - dn) / (2.0 * h);
        }
        g
    }

    fn check_family(prop: &Proposal, dim: usize, y: &[f64]) {
        let mut rng = RngStream::root(31);
        let cov = PsdMat::isotropic(dim, 0.8).unwrap();
        let feature: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let dist = StepDist::Full { mean: feature, cov: &cov };
        let eps: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let a: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let c_r = -1.0;

        let drawn = prop.draw(&dist, y, &eps);
        let mut g_params = vec![0.0; prop.param_len()];
        let mut g_feature = vec![0.0; dim];
        prop.backprop(&drawn.tape, &a, c_r, &mut g_params, &mut g_feature);

        let fd = fd_params(prop, &dist, y, &eps, &a, c_r);
        for (k, (ana, num)) in g_params.iter().zip(&fd).enumerate() {
            assert_relative_eq!(ana, num, max_relative = 2e-5, epsilon = 1e-8);
            let _ = k;
        }

        // Feature gradient by FD on the distribution mean.
        let f0 = dist.mean().to_vec();
        let mut fd_f = vec![0.0; dim];
        for i in 0..dim {
            let h = 1e-6 * f0[i].abs().max(1.0);
            let mut fp = f0.clone();
            fp[i] += h;
            let up = surrogate(prop, &StepDist::Full { mean: fp.clone(), cov: &cov }, y, &eps, &a, c_r);
            fp[i] = f0[i] - h;
            let dn = surrogate(prop, &StepDist::Full { mean: fp, cov: &cov }, y, &eps, &a, c_r);
            fd_f[i] = (up - dn) / (2.0 * h);
        }
        for (ana, num) in g_feature.iter().zip(&fd_f) {
            assert_relative_eq!(ana, num, max_relative = 2e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn affine_backprop_matches_finite_differences() {
        let mut prop = Proposal::affine(3);
        if let Proposal::Affine(p) = &mut prop {
            p.mu = vec![0.2, -0.1, 0.4];
            p.beta = vec![0.9, 1.1, 0.6];
            p.log_scale = vec![-0.3, 0.1, -0.8];
        }
        check_family(&prop, 3, &[0.5, -0.5]);
    }

    #[test]
    fn mlp_backprop_matches_finite_differences() {
        let mut rng = RngStream::root(77);
        let mut prop = Proposal::mlp(3, 2, 8, &mut rng);
        // Perturb the heads so their gradients are exercised away from zero.
        let mut v = prop.params();
        let mut r2 = RngStream::root(78);
        for x in v.iter_mut() {
            *x += 0.1 * r2.next_normal();
        }
        prop.set_params(&v);
        check_family(&prop, 3, &[0.5, -0.5]);
    }

    #[test]
    fn scale_floor_clamps_value_and_zeroes_gradient() {
        let mut prop = Proposal::affine(1);
        if let Proposal::Affine(p) = &mut prop {
            p.log_scale = vec![-20.0]; // exp ≈ 2e-9, well under the floor
        }
        let cov = PsdMat::isotropic(1, 1.0).unwrap();
        let dist = StepDist::Full { mean: vec![0.0], cov: &cov };
        let drawn = prop.draw(&dist, &[], &[1.5]);
        assert_relative_eq!(drawn.x[0], 1.5 * SCALE_FLOOR, max_relative = 1e-12);

        let mut g_params = vec![0.0; 3];
        let mut g_feature = vec![0.0; 1];
        prop.backprop(&drawn.tape, &[1.0], -1.0, &mut g_params, &mut g_feature);
        assert_eq!(g_params[2], 0.0, "clamped scale must have zero gradient");
        assert!(g_params[0] != 0.0);
    }

    #[test]
    fn initial_mlp_matches_unit_bootstrap_mean() {
        let mut rng = RngStream::root(3);
        let prop = Proposal::mlp(2, 2, 16, &mut rng);
        let cov = PsdMat::isotropic(2, 1.0).unwrap();
        let dist = StepDist::Full { mean: vec![1.2, -0.7], cov: &cov };
        let drawn = prop.draw(&dist, &[0.3, 0.9], &[0.0, 0.0]);
        // Zero heads ⇒ mean = feature, σ = 1 exactly.
        assert_eq!(drawn.x, vec![1.2, -0.7]);
    }

    #[test]
    fn params_roundtrip() {
        let mut rng = RngStream::root(5);
        for prop in [Proposal::affine(4), Proposal::mlp(4, 3, 10, &mut rng)] {
            let v = prop.params();
            assert_eq!(v.len(), prop.param_len());
            let mut q = prop.clone();
            let shifted: Vec<f64> = v.iter().map(|x| x + 1.0).collect();
            q.set_params(&shifted);
            assert_eq!(q.params(), shifted);
        }
        assert_eq!(Proposal::Bootstrap.param_len(), 0);
    }

    #[test]
    fn bootstrap_log_r_equals_transition_logpdf() {
        let cov = PsdMat::isotropic(2, 0.5).unwrap();
        let dist = StepDist::Full { mean: vec![0.3, -0.3], cov: &cov };
        let drawn = Proposal::Bootstrap.draw(&dist, &[], &[0.7, -1.1]);
        let (lp, _) = dist.logpdf(&drawn.x);
        assert_eq!(drawn.log_r, lp);
    }
}
