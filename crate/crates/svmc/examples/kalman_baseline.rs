//! Exact filtering on a linear-Gaussian state space model.
//!
//! Simulates a banded-transition LDS, runs the Kalman filter, and prints
//! the per-step predictive log-likelihood decomposition. Every particle
//! method in this crate is benchmarked against these numbers.
//!
//! Run with: cargo run --release --example kalman_baseline

use svmc::kalman::{GaussianBelief, KalmanFilter};
use svmc::sim::{Dataset, LdsConfig, SystemConfig};

fn main() -> svmc::Result<()> {
    let cfg = LdsConfig { steps: 50, dim: 10, alpha: 0.42 };
    let system = SystemConfig::Lds(cfg.clone());
    let ds = Dataset::generate(&system, 7)?;

    let model = svmc::sim::lds_model(&cfg)?;
    let kf = KalmanFilter::from_model(&model).expect("LDS is linear-Gaussian");
    let prior = GaussianBelief {
        mean: model.prior.mean.clone(),
        cov: model.prior.cov.mat().clone(),
    };

    let (beliefs, increments) = kf.run(&prior, &ds.observations)?;

    println!("step  log p(y_t | y_1:t-1)   posterior mean norm");
    for (t, (b, inc)) in beliefs.iter().zip(&increments).enumerate() {
        if t % 10 == 0 || t + 1 == beliefs.len() {
            let norm = b.mean.iter().map(|v| v * v).sum::<f64>().sqrt();
            println!("{:4}  {:20.6}  {:18.6}", t + 1, inc, norm);
        }
    }

    let total: f64 = increments.iter().sum();
    println!("\nlog marginal likelihood: {total:.6}");
    println!("negative log-likelihood: {:.6}", -total);

    // Filtered error against the simulated latents.
    let mse: f64 = beliefs
        .iter()
        .zip(&ds.latents)
        .map(|(b, x)| {
            b.mean.iter().zip(x).map(|(m, v)| (m - v) * (m - v)).sum::<f64>()
        })
        .sum::<f64>()
        / beliefs.len() as f64;
    println!("filtered RMSE: {:.6}", mse.sqrt());
    Ok(())
}
