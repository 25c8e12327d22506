//! Mini-batch conditional Lagrangian flow matching.
//!
//! Each step draws `m / n` independent pairs of size-`n` batches, couples
//! every pair by exact OT under the Lagrangian action cost, samples one time
//! per matched pair, and regresses the network onto the closed-form
//! least-action velocity at the closed-form position.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::PointBatch;
use crate::coupling::{couple, CouplingPlan};
use crate::error::{Error, Result};
use crate::lagrangian::{trajectory_state_into, Endpoints, LagrangianSpec};
use crate::metrics::EvalReport;
use crate::neuralnet::{AdamConfig, AdamState, Architecture, EmaState, VelocityModel};
use crate::synthdata::{DatasetName, DatasetSpec, Sampler};

/// ChaCha stream ids used under the run seeds.
pub mod streams {
    pub const SOURCE: u64 = 0;
    pub const TARGET: u64 = 1;
    pub const TIMES: u64 = 2;
    pub const INIT: u64 = crate::neuralnet::INIT_STREAM;
    pub const EVAL_SOURCE: u64 = 4;
    pub const EVAL_TARGET: u64 = 5;
    pub const NPE_TARGET: u64 = 6;
}

fn default_log_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lagrangian: LagrangianSpec,
    pub source: DatasetSpec,
    pub target: DatasetSpec,
    #[serde(default)]
    pub architecture: Architecture,
    pub ot_batch_size: usize,
    pub train_batch_size: usize,
    pub steps: usize,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub ema_decay: Option<f64>,
    /// Seeds parameter initialization and time sampling.
    pub seed: u64,
    /// A training record is kept every `log_every` steps.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Periodic evaluation cadence in steps; 0 disables it.
    #[serde(default)]
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lagrangian: LagrangianSpec::Harmonic { omega: 1.0 },
            source: DatasetSpec::new(DatasetName::Gaussian, 0),
            target: DatasetSpec::new(DatasetName::Moons, 0),
            architecture: Architecture::default(),
            ot_batch_size: 256,
            train_batch_size: 256,
            steps: 20_000,
            optimizer: AdamConfig::default(),
            ema_decay: None,
            seed: 0,
            log_every: 1,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    /// Uses `seed` for every stream of the run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.source.seed = seed;
        self.target.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.lagrangian.validate()?;
        self.source.validate()?;
        self.target.validate()?;
        let d = self.architecture.dim;
        Architecture::new(d, self.architecture.width, self.architecture.depth)?;
        for (what, got) in [("source", self.source.dimension), ("target", self.target.dimension)] {
            if got != d {
                return Err(Error::InvalidConfig(format!(
                    "{what} dimension {got} does not match model dimension {d}"
                )));
            }
        }
        if let Some(ld) = self.lagrangian.dimension() {
            if ld != d {
                return Err(Error::DimensionMismatch { expected: d, got: ld });
            }
        }
        if self.ot_batch_size == 0 || self.train_batch_size == 0 {
            return Err(Error::InvalidConfig("batch sizes must be positive".into()));
        }
        if self.train_batch_size % self.ot_batch_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "training batch {} is not a multiple of the OT batch {}",
                self.train_batch_size, self.ot_batch_size
            )));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("bad optimizer settings {o:?}")));
        }
        if let Some(decay) = self.ema_decay {
            if !(0.0..=1.0).contains(&decay) {
                return Err(Error::InvalidConfig(format!("EMA decay {decay} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    pub elapsed_seconds: f64,
    #[serde(default)]
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VelocityModel,
    /// EMA shadow of the parameters, when enabled.
    pub ema: Option<VelocityModel>,
    pub records: Vec<TrainRecord>,
}

/// Closed-form regression targets along matched pairs:
/// `position_i = γ(t_i)` and `velocity_i = γ̇(t_i)` for the least-action path
/// from `source_i` to `target_{σ(i)}`.
pub fn make_targets(
    spec: &LagrangianSpec,
    plan: &CouplingPlan,
    source: &PointBatch,
    target: &PointBatch,
    times: &[f64],
) -> Result<(PointBatch, PointBatch)> {
    let n = source.len();
    if plan.len() != n || target.len() != n || times.len() != n {
        return Err(Error::BatchSizeMismatch {
            left: n,
            right: plan.len().min(target.len()).min(times.len()),
        });
    }
    let d = source.dim();
    let mut positions = PointBatch::zeros(n, d);
    let mut velocities = PointBatch::zeros(n, d);
    for i in 0..n {
        let ep = Endpoints::new(source.row(i), target.row(plan.assignment[i]))?;
        trajectory_state_into(spec, ep, times[i], positions.row_mut(i), velocities.row_mut(i))?;
    }
    Ok((positions, velocities))
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(cfg, |_, _| None)
}

/// Like [`train`], calling `observer(step, model)` every `cfg.eval_every`
/// steps and attaching its report to that step's record.
pub fn train_with_observer(
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &VelocityModel) -> Option<EvalReport>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut model = VelocityModel::new(cfg.architecture, cfg.seed);
    let mut adam = AdamState::new(cfg.optimizer, model.params().len());
    let mut ema = match cfg.ema_decay {
        Some(decay) => Some(EmaState::new(decay, model.params())?),
        None => None,
    };
    let mut source = Sampler::with_stream(cfg.source.clone(), streams::SOURCE)?;
    let mut target = Sampler::with_stream(cfg.target.clone(), streams::TARGET)?;
    let mut time_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    time_rng.set_stream(streams::TIMES);

    let n = cfg.ot_batch_size;
    let chunks = cfg.train_batch_size / n;
    let d = cfg.architecture.dim;
    let mut records = Vec::with_capacity(cfg.steps / cfg.log_every + 1);

    for step in 1..=cfg.steps {
        let mut xs = Vec::with_capacity(cfg.train_batch_size * d);
        let mut vs = Vec::with_capacity(cfg.train_batch_size * d);
        let mut ts = Vec::with_capacity(cfg.train_batch_size);
        for _ in 0..chunks {
            let x0 = source.sample(n);
            let x1 = target.sample(n);
            let plan = couple(&cfg.lagrangian, &x0, &x1)?;
            let times: Vec<f64> = (0..n).map(|_| time_rng.random::<f64>()).collect();
            let (pos, vel) = make_targets(&cfg.lagrangian, &plan, &x0, &x1, &times)?;
            xs.extend_from_slice(pos.as_slice());
            vs.extend_from_slice(vel.as_slice());
            ts.extend_from_slice(&times);
        }
        let (loss, grad) = match model.loss_and_grad(&xs, &ts, &vs) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    step,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        adam.step(model.params_mut(), &grad)?;
        if let Some(e) = ema.as_mut() {
            e.update(model.params());
        }

        let evaluate = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        if step % cfg.log_every == 0 || step == cfg.steps || evaluate {
            let eval = if evaluate { observer(step, &model) } else { None };
            records.push(TrainRecord {
                step,
                loss,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                eval,
            });
        }
    }

    let ema = match ema {
        Some(e) => Some(VelocityModel::from_params(cfg.architecture, e.shadow)?),
        None => None,
    };
    Ok(TrainOutcome { model, ema, records })
}
