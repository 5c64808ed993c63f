//! Bootstrap particle filter versus the exact Kalman answer.
//!
//! The bootstrap filter proposes from the transition density, so its
//! importance weights are just emission likelihoods. The estimator of the
//! marginal likelihood is unbiased for any particle count; this example
//! shows the estimate tightening as N grows.
//!
//! Run with: cargo run --release --example bootstrap_filter

use svmc::kalman::{GaussianBelief, KalmanFilter};
use svmc::numerics::RngStream;
use svmc::proposal::Proposal;
use svmc::sim::{Dataset, LdsConfig, SystemConfig};
use svmc::smc::{smc_step, MarginalLik, ParticleCloud, StepOpts};

fn run_bpf(
    model: &svmc::models::StateSpaceModel,
    ys: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> svmc::Result<f64> {
    let run_root = RngStream::root(seed);
    let mut cloud = ParticleCloud::init(n, &model.prior, &run_root)?;
    let prop = Proposal::Bootstrap;
    let opts = StepOpts::default();
    let mut ml = MarginalLik::default();
    for y in ys {
        let diag = smc_step(&mut cloud, model, &prop, y, &opts, &run_root)?;
        ml.push(diag.log_like_increment);
    }
    Ok(ml.total)
}

fn main() -> svmc::Result<()> {
    let cfg = LdsConfig { steps: 30, dim: 4, alpha: 0.42 };
    let ds = Dataset::generate(&SystemConfig::Lds(cfg.clone()), 3)?;
    let model = svmc::sim::lds_model(&cfg)?;

    let kf = KalmanFilter::from_model(&model).unwrap();
    let prior = GaussianBelief {
        mean: model.prior.mean.clone(),
        cov: model.prior.cov.mat().clone(),
    };
    let exact = kf.log_likelihood(&prior, &ds.observations)?;
    println!("exact log marginal likelihood: {exact:.4}\n");

    println!("{:>6}  {:>12}  {:>10}  {:>10}", "N", "mean est.", "sd", "|bias|");
    for &n in &[25usize, 100, 400, 1600] {
        let reps = 40;
        let estimates: Vec<f64> = (0..reps)
            .map(|r| run_bpf(&model, &ds.observations, n, 1000 + r))
            .collect::<svmc::Result<_>>()?;
        let mean = estimates.iter().sum::<f64>() / reps as f64;
        let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
            / (reps - 1) as f64;
        println!(
            "{:>6}  {:>12.4}  {:>10.4}  {:>10.4}",
            n,
            mean,
            var.sqrt(),
            (mean - exact).abs()
        );
    }
    println!("\nthe log estimate is biased low (Jensen); the bias shrinks with N");
    Ok(())
}
