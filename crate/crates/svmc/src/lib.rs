//! Streaming variational Monte Carlo.
//!
//! A particle filter whose proposal distribution is adapted online by
//! stochastic gradient ascent on a per-step evidence lower bound, plus an
//! extension that learns unknown latent dynamics with sparse Gaussian
//! processes in constant time per step.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] — small dense linear algebra, Cholesky with a jitter
//!   schedule, log-sum-exp, counter-based RNG streams, kernels, and log
//!   densities with analytic gradients.
//! * [`models`] — state-space model building blocks (dynamics means,
//!   emission families, initial priors).
//! * [`proposal`] — reparameterised proposal families (affine, MLP) and
//!   the bootstrap fallback.
//! * [`smc`] — the particle cloud, resampling, and one filtering step.
//! * [`variational`] — the per-step surrogate objective, Adam, and the
//!   adaptive filtering step.
//! * [`gp`] — per-particle sparse GP beliefs over the transition function
//!   and the GP-marginalised filtering step.
//! * [`kalman`] — exact reference filter for linear-Gaussian systems.
//! * [`sim`] — data generators for the benchmark systems.
//! * [`cli`] — configs, output records, and the subcommand driver used by
//!   the `svmc` binary.
//!
//! See the `examples/` directory for end-to-end usage; each example is a
//! runnable walk-through of one capability.

pub mod cli;
pub mod error;
pub mod gp;
pub mod kalman;
pub mod models;
pub mod numerics;
pub mod proposal;
pub mod sim;
pub mod smc;
pub mod variational;

pub use error::{Error, Result};
