//! Run and sweep configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use lagflow::odesolve::Method;
use lagflow::{EvalProtocol, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

fn default_eval_seed() -> u64 {
    1234
}

fn yes() -> bool {
    true
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Held-out evaluation sizes, NPE reference frequency and the inference
    /// solver used for generation and W2.
    #[serde(default)]
    pub eval: EvalProtocol,
    #[serde(default = "default_eval_seed")]
    pub eval_seed: u64,
    /// Evaluate the final model and write `eval.csv` after training.
    #[serde(default = "yes")]
    pub final_eval: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            eval: EvalProtocol::default(),
            eval_seed: default_eval_seed(),
            final_eval: true,
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.eval.solver.validate()?;
        if self.eval.n_eval == 0 {
            return Err(CliError::Usage("eval.n_eval must be positive".into()));
        }
        lagflow::LagrangianSpec::harmonic(self.eval.omega_ref)?;
        Ok(())
    }
}

/// Which run parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Harmonic frequency of the training Lagrangian; 0 means free particle.
    Omega,
    /// Fixed-step inference budget, evaluated on one trained model per seed.
    Nfe,
    OtBatchSize,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Omega => "omega",
            SweepAxis::Nfe => "nfe",
            SweepAxis::OtBatchSize => "ot_batch_size",
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Euler, Method::Midpoint, Method::Rk4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    /// Solvers compared along an NFE sweep; ignored by the other axes.
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(CliError::BadSweep("no values".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::BadSweep("no seeds".into()));
        }
        for &v in &self.values {
            let integral = v >= 1.0 && v.fract() == 0.0;
            match self.axis {
                SweepAxis::Omega if v != 0.0 => {
                    lagflow::LagrangianSpec::harmonic(v)?;
                }
                SweepAxis::Nfe | SweepAxis::OtBatchSize if !integral => {
                    return Err(CliError::BadSweep(format!(
                        "{} values must be positive integers, got {v}",
                        self.axis.as_str()
                    )));
                }
                _ => {}
            }
        }
        if self.axis == SweepAxis::Nfe && self.methods.is_empty() {
            return Err(CliError::BadSweep("no methods for an NFE sweep".into()));
        }
        self.base.validate()
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}
