//! Learning unknown switching dynamics online with a sparse GP.
//!
//! The latent path traces a stock-car track: two straightaways joined by
//! half-circle turns, driven by a recurrent switching linear system. The
//! filter knows nothing about the regimes — it models the displacement
//! field x_{t+1} - x_t with per-coordinate sparse GPs on a fixed inducing
//! grid, updated by one conjugate rank-one step per filtering step, so
//! cost per step is constant in t.
//!
//! Run with: cargo run --release --example svmc_gp_nascar

use svmc::gp::{predictive_mixture, rollout, svmc_gp_step, GpDynamics, GpSsm, InducingGrid};
use svmc::models::InitialPrior;
use svmc::numerics::{rng::tag, RngStream, SquaredExpKernel};
use svmc::proposal::Proposal;
use svmc::sim::{nascar, Dataset, NascarConfig, SystemConfig};
use svmc::smc::StepOpts;
use svmc::variational::{TrainConfig, Trainer};

fn main() -> svmc::Result<()> {
    let cfg = NascarConfig { steps: 1500, obs_dim: 50, ..Default::default() };
    let data_seed = 2;
    let ds = Dataset::generate(&SystemConfig::Nascar(cfg.clone()), data_seed)?;

    // Displacement-field GP: 8x6 inducing grid over the track bounding box,
    // squared-exponential kernel, small drift so the belief can keep
    // adapting if the dynamics were to change.
    let grid = InducingGrid::regular(&[-5.0, -3.0], &[5.0, 3.0], &[8, 6])?;
    let kernel = SquaredExpKernel { lengthscale: 1.0, variance: 1.0 };
    let gp = GpDynamics::new(grid, kernel, 1e-3, 1e-5)?;
    let emission = svmc::sim::nascar_emission(&cfg, data_seed)?;
    let mut ssm = GpSsm::new(gp, emission, InitialPrior::standard(2))?;

    let run_root = RngStream::root(13);
    let mut init = run_root.derive(&[0, tag::PROPOSE, 0]);
    let mut prop = Proposal::mlp(2, cfg.obs_dim, 64, &mut init);
    let train = TrainConfig { sgd_steps: 10, grad_particles: 4, ..Default::default() };
    let mut trainer = Trainer::new(&prop, 0, 0, train)?;
    let mut cloud = ssm.init_cloud(50, &run_root)?;

    let opts = StepOpts::default();
    let mut means = Vec::new();
    for (t, y) in ds.observations.iter().enumerate() {
        svmc_gp_step(&mut cloud, &mut ssm, &mut prop, &mut trainer, y, &opts, &run_root)?;
        means.push(cloud.filtered_moments()?.0);
        if (t + 1) % 500 == 0 {
            println!("step {:>4}: filtered mean ({:+.3}, {:+.3})", t + 1, means[t][0], means[t][1]);
        }
    }

    // Tracking error once the GP has seen a full lap or two.
    let tail: f64 = means[1000..]
        .iter()
        .zip(&ds.latents[1000..])
        .map(|(m, x)| (m[0] - x[0]).powi(2) + (m[1] - x[1]).powi(2))
        .sum::<f64>()
        / 500.0;
    println!("\nRMSE over steps 1000-1500: {:.4}", tail.sqrt());

    // Forecast by iterating the posterior mean map from the last estimate.
    let horizon = 200;
    let fc = rollout(&cloud, &ssm.gp, &means[1499], horizon)?;
    let truth = Dataset::generate(
        &SystemConfig::Nascar(NascarConfig { steps: 1500 + horizon, ..cfg.clone() }),
        data_seed,
    )?;
    let mut mse_fc = 0.0;
    let mut mse_hold = 0.0;
    for h in 0..horizon {
        let x = &truth.latents[1500 + h];
        mse_fc += (fc[h][0] - x[0]).powi(2) + (fc[h][1] - x[1]).powi(2);
        mse_hold += (means[1499][0] - x[0]).powi(2) + (means[1499][1] - x[1]).powi(2);
    }
    println!(
        "200-step forecast MSE: {:.4}  (persistence baseline: {:.4})",
        mse_fc / horizon as f64,
        mse_hold / horizon as f64
    );

    // Learned velocity field against the generating regime map at a few
    // points on the track.
    println!("\npoint            learned velocity     true velocity");
    for p in [[2.0f64, 1.0], [2.0, -1.0], [-2.0, 1.0], [-2.0, -1.0], [0.0, 1.05]] {
        let (m, _) = predictive_mixture(&cloud, &ssm.gp, &p)?;
        let v = [m[0] - p[0], m[1] - p[1]];
        let tv = nascar::mean_displacement(&p);
        println!(
            "({:+.2}, {:+.2})   ({:+.4}, {:+.4})   ({:+.4}, {:+.4})",
            p[0], p[1], v[0], v[1], tv[0], tv[1]
        );
    }
    Ok(())
}
