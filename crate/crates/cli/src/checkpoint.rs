//! Binary checkpoint: `LAGFLOW1` magic, a little-endian `u64` header
//! length, the JSON header, then the parameters as little-endian `f64`.

use std::fs;
use std::path::Path;

use lagflow::{Architecture, DatasetSpec, LagrangianSpec, VelocityModel};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const MAGIC: &[u8; 8] = b"LAGFLOW1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub lagrangian: LagrangianSpec,
    pub seed: u64,
    pub steps: usize,
    pub source: DatasetSpec,
    pub target: DatasetSpec,
    /// Set when the stored weights are an EMA shadow with this decay.
    #[serde(default)]
    pub ema_decay: Option<f64>,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: VelocityModel,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let params = self.model.params();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| CliError::BadCheckpoint {
            path: path.to_owned(),
            reason: reason.to_string(),
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let body = usize::try_from(len)
            .ok()
            .and_then(|l| l.checked_add(16))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..body])
            .map_err(|e| bad(&format!("header: {e}")))?;
        let rest = &bytes[body..];
        if rest.len() != 8 * header.param_count {
            return Err(bad(&format!(
                "expected {} parameters, found {} bytes",
                header.param_count,
                rest.len()
            )));
        }
        let params = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let model = VelocityModel::from_params(header.architecture, params)?;
        Ok(Self { header, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes, path)
    }
}
