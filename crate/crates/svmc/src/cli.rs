//! Command-line harness: dataset simulation, filtering, benchmarking,
//! line-by-line streaming, and velocity-field export.
//!
//! File formats: JSON for configuration, JSONL for datasets and results,
//! CSV for tables and fields. All outputs are byte-deterministic for a
//! fixed config and seed; wall-clock fields are emitted only under
//! `--timing` so that determinism is checkable on the full bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::gp::{mixture_moments, svmc_gp_step, GpBelief, GpDynamics, GpSsm, InducingGrid};
use crate::kalman::{GaussianBelief, KalmanFilter};
use crate::models::{Emission, InitialPrior, StateSpaceModel};
use crate::numerics::rng::{stream_id, tag};
use crate::numerics::{RngStream, SquaredExpKernel};
use crate::proposal::Proposal;
use crate::sim::{
    analog_emission, chaotic_rnn_model, lds_model, nascar_emission, Dataset, SystemConfig,
};
use crate::smc::{smc_step, ParticleCloud, ResampleScheme, StepOpts};
use crate::variational::{svmc_step, TrainConfig, Trainer};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Exact filter; linear-Gaussian systems only.
    Kalman,
    /// Bootstrap particle filter (transition proposal, no adaptation).
    Bpf,
    /// Particle filter with online proposal adaptation.
    Svmc,
    /// Adaptive particle filter learning the dynamics with sparse GPs.
    SvmcGp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub particles: usize,
    pub resample: ResampleScheme,
    /// Resample when ESS < threshold · N; 1.0 resamples every step.
    pub ess_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { particles: 100, resample: ResampleScheme::Multinomial, ess_threshold: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalFamily {
    Bootstrap,
    Affine,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalConfig {
    pub family: ProposalFamily,
    /// Hidden width of the MLP family.
    pub hidden: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig { family: ProposalFamily::Affine, hidden: 64 }
    }
}

/// Sparse-GP dynamics settings: inducing grid, kernel, and noise scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: Vec<usize>,
    #[serde(default = "GpConfig::default_lengthscale")]
    pub lengthscale: f64,
    #[serde(default = "GpConfig::default_variance")]
    pub variance: f64,
    pub process_var: f64,
    #[serde(default)]
    pub drift_var: f64,
}

impl GpConfig {
    fn default_lengthscale() -> f64 {
        1.0
    }

    fn default_variance() -> f64 {
        1.0
    }

    /// Stock grids for the systems whose dynamics are meant to be learned.
    pub fn default_for(system: &SystemConfig) -> Result<GpConfig> {
        match system {
            SystemConfig::Nascar(_) => Ok(GpConfig {
                lo: vec![-5.0, -3.0],
                hi: vec![5.0, 3.0],
                per_axis: vec![8, 6],
                lengthscale: 1.0,
                variance: 1.0,
                process_var: 0.001,
                drift_var: 1e-5,
            }),
            SystemConfig::Analog(_) => Ok(GpConfig {
                lo: vec![-1.5, -1.5, -1.5],
                hi: vec![1.5, 1.5, 1.5],
                per_axis: vec![4, 4, 4],
                lengthscale: 0.7,
                variance: 1.0,
                process_var: 1e-3,
                drift_var: 1e-5,
            }),
            _ => Err(Error::Config(
                "no default GP settings for this system; provide a \"gp\" config block".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<GpDynamics> {
        let grid = InducingGrid::regular(&self.lo, &self.hi, &self.per_axis)?;
        let kernel = SquaredExpKernel::new(self.lengthscale, self.variance)?;
        GpDynamics::new(grid, kernel, self.process_var, self.drift_var)
    }
}

/// One experiment: a system, a method, and every knob either can take.
/// Unknown keys are rejected so config typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default = "ExperimentConfig::default_method")]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    /// Seed of the dataset / generating model; defaults to `seed`.
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub proposal: ProposalConfig,
    #[serde(default)]
    pub gp: Option<GpConfig>,
    #[serde(default = "ExperimentConfig::default_replications")]
    pub replications: usize,
}

impl ExperimentConfig {
    fn default_method() -> Method {
        Method::Svmc
    }

    fn default_replications() -> usize {
        1
    }

    pub fn new(system: SystemConfig, method: Method) -> ExperimentConfig {
        ExperimentConfig {
            system,
            method,
            seed: 0,
            data_seed: None,
            filter: FilterConfig::default(),
            train: TrainConfig::default(),
            proposal: ProposalConfig::default(),
            gp: None,
            replications: 1,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn from_json(reader: impl Read) -> Result<ExperimentConfig> {
        Ok(serde_json::from_reader(reader)?)
    }
}

// ---------------------------------------------------------------------------
// Records

/// One output line per filtering step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub t: usize,
    /// Filtered state mean.
    pub mean: Vec<f64>,
    /// Diagonal of the filtered state covariance.
    pub cov_diag: Vec<f64>,
    /// Effective sample size; absent for exact (non-particle) filters.
    pub ess: Option<f64>,
    /// Estimate of log p(y_t | y_{1:t−1}).
    pub log_ml_increment: f64,
    /// Per-step latency; only emitted under --timing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_us: Option<u64>,
}

/// Trailing summary line of a filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub kind: String,
    pub method: Method,
    pub steps: usize,
    /// −Σ_t log_ml_increment, the negative evidence lower bound.
    pub neg_elbo: f64,
    /// Root-mean-square Euclidean error of the filtered means against the
    /// true latents, when the dataset carries them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResultsHeader {
    schema: String,
    method: Method,
    seed: u64,
    particles: usize,
}

/// Saved terminal state of a GP filter run, enough to evaluate the learned
/// dynamics anywhere (velocity fields, forecasts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub step: usize,
    pub gp: GpDynamics,
    pub states: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
    pub beliefs: Vec<GpBelief>,
}

impl GpSnapshot {
    pub fn load(path: &Path) -> Result<GpSnapshot> {
        let mut snap: GpSnapshot = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        snap.gp.refresh()?; // the Gram factor is not serialized
        Ok(snap)
    }
}

// ---------------------------------------------------------------------------
// Dataset JSONL

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    schema: String,
    system: String,
    params: serde_json::Value,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepLine {
    t: usize,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
}

const DATASET_SCHEMA: &str = "svmc-dataset-v1";
const RESULTS_SCHEMA: &str = "svmc-results-v1";

pub fn write_dataset(ds: &Dataset, mut w: impl Write) -> Result<()> {
    let mut value = serde_json::to_value(&ds.system)?;
    let obj = value.as_object_mut().expect("system serializes to an object");
    let name = obj.remove("name").expect("tagged enum carries its name");
    let header = DatasetHeader {
        schema: DATASET_SCHEMA.into(),
        system: name.as_str().expect("tag is a string").into(),
        params: value,
        seed: ds.seed,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (i, y) in ds.observations.iter().enumerate() {
        let line = StepLine { t: i + 1, y: y.clone(), x: ds.latents.get(i).cloned() };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset(r: impl BufRead) -> Result<Dataset> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Config("empty dataset file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.schema != DATASET_SCHEMA {
        return Err(Error::Config(format!("unexpected dataset schema {:?}", header.schema)));
    }
    let mut tagged = header.params;
    tagged
        .as_object_mut()
        .ok_or_else(|| Error::Config("dataset params must be an object".into()))?
        .insert("name".into(), serde_json::Value::String(header.system));
    let system: SystemConfig = serde_json::from_value(tagged)?;

    let mut latents = Vec::new();
    let mut observations = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let step: StepLine = serde_json::from_str(&line)?;
        if step.t != i + 1 {
            return Err(Error::Config(format!("dataset step {} out of order (expected {})", step.t, i + 1)));
        }
        if let Some(x) = step.x {
            latents.push(x);
        }
        observations.push(step.y);
    }
    if !latents.is_empty() && latents.len() != observations.len() {
        return Err(Error::Config("dataset latents must cover all steps or none".into()));
    }
    Ok(Dataset { system, seed: header.seed, latents, observations })
}

// ---------------------------------------------------------------------------
// Filter engine

enum EngineState {
    Kalman { filter: KalmanFilter, belief: GaussianBelief },
    Parametric { model: StateSpaceModel, cloud: ParticleCloud<()>, prop: Proposal, trainer: Trainer },
    Gp { ssm: GpSsm, cloud: ParticleCloud<GpBelief>, prop: Proposal, trainer: Trainer },
}

/// A configured filter holding all cross-step state; one observation in,
/// one record out. This is the single code path behind `filter`, `stream`,
/// and `benchmark`.
pub struct FilterEngine {
    state: EngineState,
    opts: StepOpts,
    run_root: RngStream,
    t: usize,
}

/// The generating model for systems with known parametric dynamics.
fn true_model(system: &SystemConfig, data_seed: u64) -> Result<StateSpaceModel> {
    match system {
        SystemConfig::Lds(c) => lds_model(c),
        SystemConfig::ChaoticRnn(c) => chaotic_rnn_model(c, data_seed),
        _ => Err(Error::Config(
            "this system has no known parametric dynamics; use method svmc-gp".into(),
        )),
    }
}

/// Emission model and state dimension used when the dynamics are learned.
fn gp_observation_model(system: &SystemConfig, data_seed: u64) -> Result<(Emission, usize)> {
    let emission = match system {
        SystemConfig::Nascar(c) => nascar_emission(c, data_seed)?,
        SystemConfig::Analog(c) => analog_emission(c)?,
        SystemConfig::Lds(_) | SystemConfig::ChaoticRnn(_) => {
            true_model(system, data_seed)?.emission
        }
    };
    let dim = emission.state_dim();
    Ok((emission, dim))
}

fn build_proposal(cfg: &ExperimentConfig, state_dim: usize, obs_dim: usize, run_root: &RngStream) -> Proposal {
    match cfg.proposal.family {
        ProposalFamily::Bootstrap => Proposal::Bootstrap,
        ProposalFamily::Affine => Proposal::affine(state_dim),
        ProposalFamily::Mlp => {
            // A dedicated stream that no per-step path reuses.
            let mut r = run_root.derive(&[0, tag::PROPOSE, 0]);
            Proposal::mlp(state_dim, obs_dim, cfg.proposal.hidden, &mut r)
        }
    }
}

impl FilterEngine {
    pub fn new(cfg: &ExperimentConfig) -> Result<FilterEngine> {
        let run_root = RngStream::root(cfg.seed);
        let data_seed = cfg.data_seed();
        let opts = StepOpts { scheme: cfg.filter.resample, ess_threshold: cfg.filter.ess_threshold };
        let state = match cfg.method {
            Method::Kalman => {
                let model = true_model(&cfg.system, data_seed)?;
                let filter = KalmanFilter::from_model(&model).ok_or_else(|| {
                    Error::Config("method kalman requires linear-Gaussian dynamics and emission".into())
                })?;
                let belief = GaussianBelief {
                    mean: model.prior.mean.clone(),
                    cov: model.prior.cov.mat().clone(),
                };
                EngineState::Kalman { filter, belief }
            }
            Method::Bpf | Method::Svmc => {
                let model = true_model(&cfg.system, data_seed)?;
                let prop = if cfg.method == Method::Bpf {
                    Proposal::Bootstrap
                } else {
                    let mut p = build_proposal(cfg, model.state_dim(), model.obs_dim(), &run_root);
                    let q = model.dynamics.noise.mat();
                    let diag: Vec<f64> = (0..q.rows()).map(|i| q.get(i, i)).collect();
                    p.init_scale_from_var(&diag)?;
                    p
                };
                let trainer = Trainer::for_model(&prop, &model, cfg.train.clone())?;
                let cloud = ParticleCloud::init(cfg.filter.particles, &model.prior, &run_root)?;
                EngineState::Parametric { model, cloud, prop, trainer }
            }
            Method::SvmcGp => {
                let (emission, dim) = gp_observation_model(&cfg.system, data_seed)?;
                let gp_cfg = match &cfg.gp {
                    Some(g) => g.clone(),
                    None => GpConfig::default_for(&cfg.system)?,
                };
                let gp = gp_cfg.build()?;
                if gp.state_dim() != dim {
                    return Err(Error::dim(format!(
                        "gp grid dimension {} vs state dimension {dim}",
                        gp.state_dim()
                    )));
                }
                let ssm = GpSsm::new(gp, emission, InitialPrior::standard(dim))?;
                let mut prop = build_proposal(cfg, dim, ssm.emission.obs_dim(), &run_root);
                // Under the prior belief the one-step predictive variance is
                // kernel variance + process variance at every location.
                let prior_var = gp_cfg.variance + gp_cfg.process_var;
                prop.init_scale_from_var(&vec![prior_var; dim])?;
                let trainer = Trainer::new(&prop, 0, ssm.emission.param_len(), cfg.train.clone())?;
                let cloud = ssm.init_cloud(cfg.filter.particles, &run_root)?;
                EngineState::Gp { ssm, cloud, prop, trainer }
            }
        };
        Ok(FilterEngine { state, opts, run_root, t: 0 })
    }

    pub fn state_dim(&self) -> usize {
        match &self.state {
            EngineState::Kalman { belief, .. } => belief.mean.len(),
            EngineState::Parametric { cloud, .. } => cloud.dim(),
            EngineState::Gp { cloud, .. } => cloud.dim(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match &self.state {
            EngineState::Kalman { filter, .. } => filter.obs_dim(),
            EngineState::Parametric { model, .. } => model.obs_dim(),
            EngineState::Gp { ssm, .. } => ssm.emission.obs_dim(),
        }
    }

    /// Absorbs one observation and reports the filtered moments.
    pub fn step(&mut self, y: &[f64]) -> Result<ResultRecord> {
        self.t += 1;
        let (mean, cov_diag, ess, inc) = match &mut self.state {
            EngineState::Kalman { filter, belief } => {
                let (next, inc) = filter.step(belief, y)?;
                *belief = next;
                let d = belief.mean.len();
                let diag = (0..d).map(|i| belief.cov.get(i, i)).collect();
                (belief.mean.clone(), diag, None, inc)
            }
            EngineState::Parametric { model, cloud, prop, trainer } => {
                let diag = if prop.is_trainable() && trainer.config.sgd_steps > 0 {
                    svmc_step(cloud, model, prop, trainer, y, &self.opts, &self.run_root)?.filter
                } else {
                    smc_step(cloud, model, prop, y, &self.opts, &self.run_root)?
                };
                let (mean, cov) = cloud.filtered_moments()?;
                let d = cloud.dim();
                let cov_diag = (0..d).map(|i| cov.get(i, i)).collect();
                (mean, cov_diag, Some(diag.ess_after), diag.log_like_increment)
            }
            EngineState::Gp { ssm, cloud, prop, trainer } => {
                let diag =
                    svmc_gp_step(cloud, ssm, prop, trainer, y, &self.opts, &self.run_root)?.filter;
                let (mean, cov) = cloud.filtered_moments()?;
                let d = cloud.dim();
                let cov_diag = (0..d).map(|i| cov.get(i, i)).collect();
                (mean, cov_diag, Some(diag.ess_after), diag.log_like_increment)
            }
        };
        Ok(ResultRecord { t: self.t, mean, cov_diag, ess, log_ml_increment: inc, wall_us: None })
    }

    /// The learned-dynamics state, when this engine is a GP filter.
    pub fn gp_snapshot(&self) -> Option<GpSnapshot> {
        match &self.state {
            EngineState::Gp { ssm, cloud, .. } => Some(GpSnapshot {
                step: cloud.step(),
                gp: ssm.gp.clone(),
                states: (0..cloud.n()).map(|i| cloud.state(i).to_vec()).collect(),
                log_weights: cloud.log_weights().to_vec(),
                beliefs: cloud.aux_all().to_vec(),
            }),
            _ => None,
        }
    }
}

/// Root-mean-square Euclidean distance between filtered means and true
/// latents over `[from, to)`.
pub fn rmse(records: &[ResultRecord], latents: &[Vec<f64>], from: usize, to: usize) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (r, x) in records.iter().zip(latents).skip(from).take(to.saturating_sub(from)) {
        acc += r.mean.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += 1;
    }
    (acc / n.max(1) as f64).sqrt()
}

/// Runs a whole dataset through a fresh engine. The workhorse behind the
/// `filter` command, `benchmark` replications, and the acceptance tests.
pub fn run_filter(
    cfg: &ExperimentConfig,
    ds: &Dataset,
) -> Result<(Vec<ResultRecord>, SummaryRecord, Option<GpSnapshot>)> {
    let mut engine = FilterEngine::new(cfg)?;
    if !ds.observations.is_empty() && ds.observations[0].len() != engine.obs_dim() {
        return Err(Error::dim(format!(
            "dataset observation dim {} vs model {}",
            ds.observations[0].len(),
            engine.obs_dim()
        )));
    }
    let mut records = Vec::with_capacity(ds.steps());
    for y in &ds.observations {
        records.push(engine.step(y)?);
    }
    let neg_elbo: f64 = -records.iter().map(|r| r.log_ml_increment).sum::<f64>();
    let rmse_val = if ds.latents.len() == records.len()
        && !records.is_empty()
        && ds.latents[0].len() == engine.state_dim()
    {
        Some(rmse(&records, &ds.latents, 0, records.len()))
    } else {
        None
    };
    let summary = SummaryRecord {
        kind: "summary".into(),
        method: cfg.method,
        steps: records.len(),
        neg_elbo,
        rmse: rmse_val,
        wall_s: None,
    };
    Ok((records, summary, engine.gp_snapshot()))
}

// ---------------------------------------------------------------------------
// Benchmark presets

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentId {
    Lds,
    Crnn,
    Nascar,
    Analog,
}

/// The method line-up each benchmark compares, with the hyperparameters
/// used in the acceptance runs.
pub fn benchmark_presets(experiment: ExperimentId, seed: u64) -> Vec<(String, ExperimentConfig)> {
    use crate::sim::{AnalogConfig, ChaoticRnnConfig, LdsConfig, NascarConfig};
    match experiment {
        ExperimentId::Lds => {
            let system = SystemConfig::Lds(LdsConfig { steps: 50, dim: 10, alpha: 0.42 });
            let base = |method| {
                let mut c = ExperimentConfig::new(system.clone(), method);
                c.seed = seed;
                c.data_seed = Some(seed);
                c
            };
            let kalman = base(Method::Kalman);

            let mut mlp = base(Method::Svmc);
            mlp.filter.particles = 100;
            mlp.proposal = ProposalConfig { family: ProposalFamily::Mlp, hidden: 64 };
            mlp.train = TrainConfig {
                grad_particles: 4,
                sgd_steps: 100,
                learning_rate: 0.004,
                ..TrainConfig::default()
            };

            // Particle budget matched to the adaptive run: N + N_SGD · L
            // transition/emission evaluations per step.
            let mut bpf = base(Method::Bpf);
            bpf.filter.particles = 100 + 100 * 4;

            // The gradient loop still runs but the step size is zero, so
            // the affine proposal stays at its bootstrap-matching init.
            let mut frozen = base(Method::Svmc);
            frozen.filter.particles = 100;
            frozen.proposal = ProposalConfig { family: ProposalFamily::Affine, hidden: 64 };
            frozen.train =
                TrainConfig { sgd_steps: 100, learning_rate: 0.0, ..TrainConfig::default() };

            vec![
                ("kalman".into(), kalman),
                ("svmc-mlp".into(), mlp),
                ("bpf".into(), bpf),
                ("svmc-affine-frozen".into(), frozen),
            ]
        }
        ExperimentId::Crnn => {
            let system =
                SystemConfig::ChaoticRnn(ChaoticRnnConfig { steps: 200, ..Default::default() });
            let base = |method| {
                let mut c = ExperimentConfig::new(system.clone(), method);
                c.seed = seed;
                c.data_seed = Some(seed);
                c
            };
            let mut svmc = base(Method::Svmc);
            svmc.filter.particles = 200;
            svmc.proposal = ProposalConfig { family: ProposalFamily::Mlp, hidden: 100 };
            // Step size chosen by sweep: larger values destabilise the
            // proposal under the heavy-tailed emission weights.
            svmc.train = TrainConfig {
                grad_particles: 4,
                sgd_steps: 15,
                learning_rate: 3e-4,
                ..TrainConfig::default()
            };
            let mut bpf = base(Method::Bpf);
            bpf.filter.particles = 2000;
            vec![("svmc-mlp".into(), svmc), ("bpf".into(), bpf)]
        }
        ExperimentId::Nascar => {
            let system = SystemConfig::Nascar(NascarConfig { steps: 1500, ..Default::default() });
            let mut gp = ExperimentConfig::new(system, Method::SvmcGp);
            gp.seed = seed;
            gp.data_seed = Some(seed);
            gp.filter.particles = 50;
            gp.proposal = ProposalConfig { family: ProposalFamily::Mlp, hidden: 64 };
            gp.train = TrainConfig {
                grad_particles: 4,
                sgd_steps: 10,
                learning_rate: 0.01,
                ..TrainConfig::default()
            };
            vec![("svmc-gp".into(), gp)]
        }
        ExperimentId::Analog => {
            let system = SystemConfig::Analog(AnalogConfig::default());
            let mut gp = ExperimentConfig::new(system, Method::SvmcGp);
            gp.seed = seed;
            gp.data_seed = Some(seed);
            gp.filter.particles = 50;
            gp.proposal = ProposalConfig { family: ProposalFamily::Mlp, hidden: 64 };
            gp.train = TrainConfig {
                grad_particles: 4,
                sgd_steps: 10,
                learning_rate: 0.01,
                ..TrainConfig::default()
            };
            vec![("svmc-gp".into(), gp)]
        }
    }
}

/// Deterministic per-replication run seed.
pub fn replication_seed(base: u64, rep: usize) -> u64 {
    stream_id(&[base, 0x5eed, rep as u64])
}

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub method: String,
    pub replications: usize,
    pub neg_elbo_mean: f64,
    pub neg_elbo_se: f64,
    pub rmse_mean: Option<f64>,
    pub rmse_se: Option<f64>,
    pub wall_s_mean: Option<f64>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every preset method of `experiment` for `replications` runs on one
/// fixed dataset realization, varying only the run seed.
pub fn run_benchmark(
    experiment: ExperimentId,
    replications: usize,
    seed: u64,
    timing: bool,
) -> Result<Vec<BenchmarkRow>> {
    use rayon::prelude::*;
    let presets = benchmark_presets(experiment, seed);
    let mut rows = Vec::with_capacity(presets.len());
    for (label, cfg) in presets {
        let ds = Dataset::generate(&cfg.system, cfg.data_seed())?;
        let results: Result<Vec<(SummaryRecord, f64)>> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut c = cfg.clone();
                c.seed = replication_seed(seed, rep);
                let started = Instant::now();
                let (_, summary, _) = run_filter(&c, &ds)?;
                Ok((summary, started.elapsed().as_secs_f64()))
            })
            .collect();
        let results = results?;
        let (neg_elbo_mean, neg_elbo_se) =
            mean_se(&results.iter().map(|(s, _)| s.neg_elbo).collect::<Vec<_>>());
        let rmses: Vec<f64> = results.iter().filter_map(|(s, _)| s.rmse).collect();
        let (rmse_mean, rmse_se) = if rmses.len() == results.len() {
            let (m, s) = mean_se(&rmses);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        let wall_s_mean = timing
            .then(|| results.iter().map(|(_, w)| w).sum::<f64>() / results.len().max(1) as f64);
        rows.push(BenchmarkRow {
            method: label,
            replications,
            neg_elbo_mean,
            neg_elbo_se,
            rmse_mean,
            rmse_se,
            wall_s_mean,
        });
    }
    Ok(rows)
}

fn write_benchmark_csv(rows: &[BenchmarkRow], timing: bool, mut w: impl Write) -> Result<()> {
    let mut header = "method,replications,neg_elbo_mean,neg_elbo_se,rmse_mean,rmse_se".to_string();
    if timing {
        header.push_str(",wall_s_mean");
    }
    writeln!(w, "{header}")?;
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut line = format!(
            "{},{},{:.6},{:.6},{},{}",
            r.method,
            r.replications,
            r.neg_elbo_mean,
            r.neg_elbo_se,
            fmt_opt(r.rmse_mean),
            fmt_opt(r.rmse_se),
        );
        if timing {
            line.push(',');
            line.push_str(&fmt_opt(r.wall_s_mean));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Command-line interface

#[derive(Parser)]
#[command(
    name = "svmc",
    version,
    about = "Streaming adaptive particle filtering and online dynamics learning"
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark dataset as JSONL.
    Simulate(SimulateArgs),
    /// Filter a dataset file, writing one record per step plus a summary.
    Filter(FilterArgs),
    /// Compare the stock method line-up on one experiment.
    Benchmark(BenchmarkArgs),
    /// Filter observations line-by-line from standard input.
    Stream(StreamArgs),
    /// Evaluate a saved GP filter's mean displacement field on a lattice.
    ExportVelocityField(ExportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's method.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Override the number of particles.
    #[arg(long)]
    particles: Option<usize>,
    /// Override the ancestors drawn per gradient iteration (L).
    #[arg(long)]
    grad_particles: Option<usize>,
    /// Override the gradient iterations per step (N_SGD).
    #[arg(long)]
    sgd_steps: Option<usize>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_json(BufReader::new(File::open(&self.config)?))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(n) = self.particles {
            cfg.filter.particles = n;
        }
        if let Some(l) = self.grad_particles {
            cfg.train.grad_particles = l;
        }
        if let Some(k) = self.sgd_steps {
            cfg.train.sgd_steps = k;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output dataset path (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Input dataset (JSONL from `simulate`).
    #[arg(long)]
    data: PathBuf,
    /// Output results path (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Record wall-clock fields (makes output timing-dependent).
    #[arg(long)]
    timing: bool,
    /// Write the final GP belief state here (svmc-gp only).
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Which benchmark experiment to run.
    #[arg(long, value_enum)]
    experiment: ExperimentId,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include mean wall time per run.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Report per-line latency in each record.
    #[arg(long)]
    timing: bool,
    /// Write the final GP belief state here on end of input (svmc-gp only).
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// GP snapshot file from `filter --snapshot` / `stream --snapshot`.
    #[arg(long)]
    snapshot: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Lattice lower corner (comma-separated; default: the snapshot's grid).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lo: Option<Vec<f64>>,
    /// Lattice upper corner.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    hi: Option<Vec<f64>>,
    /// Lattice points per axis.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    per_axis: Option<Vec<usize>>,
}

/// Entry point for the `svmc` binary.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Filter(args) => cmd_filter(args),
        Cmd::Benchmark(args) => cmd_benchmark(args),
        Cmd::Stream(args) => cmd_stream(args),
        Cmd::ExportVelocityField(args) => cmd_export_velocity_field(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let ds = Dataset::generate(&cfg.system, cfg.data_seed())?;
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_dataset(&ds, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    let ds = read_dataset(BufReader::new(File::open(&args.data)?))?;
    // The dataset is the authority on what generated it.
    cfg.system = ds.system.clone();
    cfg.data_seed = Some(ds.seed);

    let mut engine = FilterEngine::new(&cfg)?;
    if !ds.observations.is_empty() && ds.observations[0].len() != engine.obs_dim() {
        return Err(Error::dim(format!(
            "dataset observation dim {} vs model {}",
            ds.observations[0].len(),
            engine.obs_dim()
        )));
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    let header = ResultsHeader {
        schema: RESULTS_SCHEMA.into(),
        method: cfg.method,
        seed: cfg.seed,
        particles: cfg.filter.particles,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;

    let run_started = Instant::now();
    let mut records = Vec::with_capacity(ds.steps());
    for y in &ds.observations {
        let started = Instant::now();
        let mut rec = engine.step(y)?;
        if args.timing {
            rec.wall_us = Some(started.elapsed().as_micros() as u64);
        }
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
        records.push(rec);
    }
    let neg_elbo: f64 = -records.iter().map(|r| r.log_ml_increment).sum::<f64>();
    let rmse_val = (ds.latents.len() == records.len()
        && !records.is_empty()
        && ds.latents[0].len() == engine.state_dim())
    .then(|| rmse(&records, &ds.latents, 0, records.len()));
    let summary = SummaryRecord {
        kind: "summary".into(),
        method: cfg.method,
        steps: records.len(),
        neg_elbo,
        rmse: rmse_val,
        wall_s: args.timing.then(|| run_started.elapsed().as_secs_f64()),
    };
    serde_json::to_writer(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;

    if let Some(path) = &args.snapshot {
        let snap = engine.gp_snapshot().ok_or_else(|| {
            Error::Config("--snapshot requires method svmc-gp".into())
        })?;
        serde_json::to_writer(BufWriter::new(File::create(path)?), &snap)?;
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let rows = run_benchmark(args.experiment, args.replications, args.seed, args.timing)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{:<22} {:>6} {:>14} {:>10} {:>12} {:>10}", "method", "reps", "neg_elbo", "se", "rmse", "se")?;
    for r in &rows {
        let fmt_opt =
            |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<22} {:>6} {:>14.4} {:>10.4} {:>12} {:>10}",
            r.method,
            r.replications,
            r.neg_elbo_mean,
            r.neg_elbo_se,
            fmt_opt(r.rmse_mean),
            fmt_opt(r.rmse_se),
        )?;
    }
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(File::create(path)?);
        write_benchmark_csv(&rows, args.timing, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// One observation line on standard input.
#[derive(Debug, Deserialize)]
struct StreamInput {
    #[allow(dead_code)]
    #[serde(default)]
    t: Option<usize>,
    y: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct StreamError<'a> {
    error: &'a str,
    line: usize,
}

fn cmd_stream(args: StreamArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let mut engine = FilterEngine::new(&cfg)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    for (lineno, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let started = Instant::now();
        let input: StreamInput = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                let msg = e.to_string();
                serde_json::to_writer(&mut err, &StreamError { error: &msg, line: lineno + 1 })?;
                err.write_all(b"\n")?;
                err.flush()?;
                continue;
            }
        };
        let mut rec = engine.step(&input.y)?;
        if args.timing {
            rec.wall_us = Some(started.elapsed().as_micros() as u64);
        }
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    if let Some(path) = &args.snapshot {
        let snap = engine.gp_snapshot().ok_or_else(|| {
            Error::Config("--snapshot requires method svmc-gp".into())
        })?;
        serde_json::to_writer(BufWriter::new(File::create(path)?), &snap)?;
    }
    Ok(())
}

/// Writes `x, E[f(x)] − x` over a lattice as CSV.
pub fn write_velocity_field(
    snap: &GpSnapshot,
    lo: &[f64],
    hi: &[f64],
    per_axis: &[usize],
    mut w: impl Write,
) -> Result<()> {
    let d = snap.gp.state_dim();
    if lo.len() != d || hi.len() != d || per_axis.len() != d {
        return Err(Error::dim("lattice bounds must match the GP state dimension"));
    }
    let weights = crate::smc::normalize_log_weights(&snap.log_weights)?;
    let lattice = InducingGrid::regular(lo, hi, per_axis)?;
    let cols: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain((0..d).map(|i| format!("v{i}")))
        .collect();
    writeln!(w, "{}", cols.join(","))?;
    for i in 0..lattice.count() {
        let x = lattice.point(i);
        let (mean, _) = mixture_moments(&weights, &snap.beliefs, &snap.gp, x);
        let fields: Vec<String> = x
            .iter()
            .map(|v| format!("{v:.6}"))
            .chain(mean.iter().zip(x).map(|(m, xv)| format!("{:.6}", m - xv)))
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

fn cmd_export_velocity_field(args: ExportArgs) -> Result<()> {
    let snap = GpSnapshot::load(&args.snapshot)?;
    let (glo, ghi) = snap.gp.grid.bounds();
    let lo = args.lo.clone().unwrap_or_else(|| glo.to_vec());
    let hi = args.hi.clone().unwrap_or_else(|| ghi.to_vec());
    let per_axis = args.per_axis.clone().unwrap_or_else(|| snap.gp.grid.per_axis().to_vec());
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_velocity_field(&snap, &lo, &hi, &per_axis, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Exit code mapping: 2 for configuration/schema problems, 3 for runtime
/// numerical failures, 1 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Dimension(_) | Error::Json(_) => 2,
        Error::Domain(_) | Error::NotPositiveDefinite { .. } | Error::WeightCollapse { .. } => 3,
        Error::Io(_) => 1,
    }
}
