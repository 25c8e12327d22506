//! Evaluation: empirical 2-Wasserstein distance, kinetic energy of a learned
//! flow, the harmonic-OT reference cost and the normalized path energy.
//!
//! The normalized path energy compares the flow's kinetic energy `K` with
//! the cheapest achievable harmonic kinetic energy `C_ω` and splits the gap
//!
//! ```text
//! K − C_ω = (k̄ − C_ω) + (K − k̄)
//!           coupling    path
//! ```
//!
//! where `k̄` is the mean harmonic kinetic energy of the endpoint pairs the
//! flow itself produces.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::batch::{dist_sq, PointBatch};
use crate::coupling::{kinetic_cost_matrix, solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::lagrangian::pair_kinetic_energy_unchecked;
use crate::odesolve::{integrate, Method, SolveSpec, VectorField};
use crate::synthdata::{DatasetSpec, Sampler};
use crate::trainer::streams;

/// RK4 steps used for kinetic-energy estimation.
pub const KINETIC_STEPS: usize = 200;
/// Reference costs below this make the normalized path energy undefined.
pub const MIN_REFERENCE_COST: f64 = 1e-12;

/// Composite Simpson's rule for samples on a uniform grid with spacing `h`.
/// Needs an odd number of samples (an even number of intervals).
pub fn simpson(values: &[f64], h: f64) -> Result<f64> {
    let len = values.len();
    if len < 3 || len % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "Simpson's rule needs an even number of intervals, got {} samples",
            len
        )));
    }
    let last = len - 1;
    let mut s = values[0] + values[last];
    for (i, v) in values.iter().enumerate().take(last).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(s * h / 3.0)
}

/// `√(mean_i ‖a_i − b_σ(i)‖²)` under the optimal assignment `σ`.
pub fn wasserstein2(a: &PointBatch, b: &PointBatch) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::BatchSizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len();
    let mut entries = Vec::with_capacity(n * n);
    for x in a.rows() {
        for y in b.rows() {
            entries.push(dist_sq(x, y));
        }
    }
    let plan = solve_assignment(&CostMatrix::new(n, entries)?)?;
    Ok(plan.mean_cost.max(0.0).sqrt())
}

/// Kinetic energy of a flow and the endpoints it produces.
#[derive(Debug, Clone)]
pub struct FlowKinetic {
    /// Batch mean of `∫₀¹ ½‖v(φ_t, t)‖² dt`.
    pub kinetic_energy: f64,
    /// `φ₁(x0)` for every source point, in source order.
    pub terminal: PointBatch,
}

/// Integrates every source point with RK4 over `KINETIC_STEPS` steps and
/// applies composite Simpson to `½‖v(φ_t, t)‖²` sampled on the step grid.
pub fn flow_kinetic_energy<F: VectorField>(field: &F, source: &PointBatch) -> Result<FlowKinetic> {
    flow_kinetic_energy_with_steps(field, source, KINETIC_STEPS)
}

pub fn flow_kinetic_energy_with_steps<F: VectorField>(
    field: &F,
    source: &PointBatch,
    steps: usize,
) -> Result<FlowKinetic> {
    if steps == 0 || steps % 2 != 0 {
        return Err(Error::InvalidConfig(format!("Simpson grid needs an even step count, got {steps}")));
    }
    if source.is_empty() {
        return Ok(FlowKinetic {
            kinetic_energy: 0.0,
            terminal: source.clone(),
        });
    }
    let solved = integrate(field, source, &SolveSpec::fixed(Method::Rk4, 4 * steps).recording())?;
    let n = source.len();
    let d = source.dim();
    // integrand[j][i]: point i at grid time j
    let mut integrand = vec![vec![0.0; solved.times.len()]; n];
    let mut v = vec![0.0; n * d];
    for (j, (t, states)) in solved.times.iter().zip(&solved.trajectory).enumerate() {
        field.eval(*t, states.as_slice(), &mut v)?;
        for i in 0..n {
            let e = 0.5 * v[i * d..(i + 1) * d].iter().map(|x| x * x).sum::<f64>();
            if !e.is_finite() {
                return Err(Error::NonFinite("velocity field"));
            }
            integrand[i][j] = e;
        }
    }
    let h = 1.0 / steps as f64;
    let mut total = 0.0;
    for row in &integrand {
        total += simpson(row, h)?;
    }
    Ok(FlowKinetic {
        kinetic_energy: total / n as f64,
        terminal: solved.states,
    })
}

/// Harmonic-OT cost: the mean matched `k_ω` under the assignment minimizing
/// total kinetic energy between the two batches.
pub fn harmonic_ot_cost(omega: f64, source: &PointBatch, target: &PointBatch) -> Result<f64> {
    if source.is_empty() {
        return Ok(0.0);
    }
    let m = kinetic_cost_matrix(omega, source, target)?;
    Ok(solve_assignment(&m)?.mean_cost)
}

/// Normalized path energy and its coupling/path split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEnergy {
    pub kinetic_energy: f64,
    pub reference_cost: f64,
    pub model_coupling_cost: f64,
    pub coupling_excess: f64,
    pub path_excess: f64,
    /// `|K / C_ω − 1|`, absent when `C_ω` is numerically zero.
    pub npe: Option<f64>,
}

/// Normalized path energy of `field` at frequency `omega`.
///
/// `source` is integrated by the flow; `target` is an independent batch of
/// the same size used only for the reference cost.
pub fn npe<F: VectorField>(
    field: &F,
    omega: f64,
    source: &PointBatch,
    target: &PointBatch,
) -> Result<PathEnergy> {
    let flow = flow_kinetic_energy(field, source)?;
    let reference_cost = harmonic_ot_cost(omega, source, target)?;
    let model_coupling_cost = if source.is_empty() {
        0.0
    } else {
        source
            .rows()
            .zip(flow.terminal.rows())
            .map(|(a, b)| pair_kinetic_energy_unchecked(omega, a, b))
            .sum::<f64>()
            / source.len() as f64
    };
    Ok(path_energy(flow.kinetic_energy, reference_cost, model_coupling_cost))
}

pub fn path_energy(kinetic_energy: f64, reference_cost: f64, model_coupling_cost: f64) -> PathEnergy {
    let npe = if reference_cost.abs() < MIN_REFERENCE_COST {
        None
    } else {
        Some((kinetic_energy / reference_cost - 1.0).abs())
    };
    PathEnergy {
        kinetic_energy,
        reference_cost,
        model_coupling_cost,
        coupling_excess: model_coupling_cost - reference_cost,
        path_excess: kinetic_energy - model_coupling_cost,
        npe,
    }
}

/// Sizes, reference frequency and sampler used by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub n_eval: usize,
    pub n_npe: usize,
    pub omega_ref: f64,
    pub solver: SolveSpec,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            n_eval: 2048,
            n_npe: 512,
            omega_ref: 1.0,
            solver: SolveSpec::adaptive(1e-5, 1e-5),
        }
    }
}

/// One evaluation of a trained flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub w2: f64,
    pub npe: Option<f64>,
    pub coupling_excess: f64,
    pub path_excess: f64,
    pub kinetic_energy: f64,
    pub reference_cost: f64,
    pub omega_ref: f64,
    pub nfe: usize,
    pub n_eval: usize,
    pub n_npe: usize,
    pub runtime_seconds: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "w2,npe,coupling_excess,path_excess,kinetic_energy,reference_cost,omega_ref,nfe,n_eval,n_npe,runtime_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.w2,
            self.npe.map(|v| v.to_string()).unwrap_or_default(),
            self.coupling_excess,
            self.path_excess,
            self.kinetic_energy,
            self.reference_cost,
            self.omega_ref,
            self.nfe,
            self.n_eval,
            self.n_npe,
            self.runtime_seconds
        )
    }
}

/// Full evaluation of `field` transporting `source` to `target`.
///
/// Draws `n_eval` held-out source and target points under `seed`, generates
/// with `protocol.solver` and reports W2; the path energy uses the first
/// `n_npe` source points and `n_npe` fresh target points.
pub fn evaluate<F: VectorField>(
    field: &F,
    source: &DatasetSpec,
    target: &DatasetSpec,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let with_seed = |d: &DatasetSpec| DatasetSpec { seed, ..d.clone() };
    let x0 = Sampler::with_stream(with_seed(source), streams::EVAL_SOURCE)?.sample(protocol.n_eval);
    let x1 = Sampler::with_stream(with_seed(target), streams::EVAL_TARGET)?.sample(protocol.n_eval);
    let generated = integrate(field, &x0, &protocol.solver)?;
    let w2 = wasserstein2(&generated.states, &x1)?;

    let n_npe = protocol.n_npe.min(protocol.n_eval);
    let sub = x0.head(n_npe);
    let fresh = Sampler::with_stream(with_seed(target), streams::NPE_TARGET)?.sample(n_npe);
    let pe = npe(field, protocol.omega_ref, &sub, &fresh)?;

    Ok(EvalReport {
        w2,
        npe: pe.npe,
        coupling_excess: pe.coupling_excess,
        path_excess: pe.path_excess,
        kinetic_energy: pe.kinetic_energy,
        reference_cost: pe.reference_cost,
        omega_ref: protocol.omega_ref,
        nfe: generated.nfe,
        n_eval: protocol.n_eval,
        n_npe,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
