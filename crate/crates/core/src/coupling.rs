//! Mini-batch optimal-transport couplings under Lagrangian costs.

use crate::batch::PointBatch;
use crate::error::{Error, Result};
use crate::batch::{dist_sq, dot};
use crate::lagrangian::{phi, psi, pair_kinetic_energy_unchecked, LagrangianSpec, SMALL_OMEGA};

/// Dense square matrix of pairwise costs `entries[i * n + j] = c(x0_i, x1_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(n, entries)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sum of `entries[i, σ(i)]` in row order.
    pub fn assignment_cost(&self, assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }
}

/// A one-to-one pairing: source `i` is matched with target `assignment[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    pub mean_cost: f64,
}

impl CouplingPlan {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// The trivial pairing `i ↦ i`, costed against `m`.
    pub fn identity(m: &CostMatrix) -> Self {
        let assignment: Vec<usize> = (0..m.size()).collect();
        plan_from(m, assignment)
    }
}

fn plan_from(m: &CostMatrix, assignment: Vec<usize>) -> CouplingPlan {
    let total_cost = m.assignment_cost(&assignment);
    let mean_cost = if assignment.is_empty() {
        0.0
    } else {
        total_cost / assignment.len() as f64
    };
    CouplingPlan {
        assignment,
        total_cost,
        mean_cost,
    }
}

fn check_batches(source: &PointBatch, target: &PointBatch) -> Result<()> {
    if source.len() != target.len() {
        return Err(Error::BatchSizeMismatch {
            left: source.len(),
            right: target.len(),
        });
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    Ok(())
}

fn pairwise(
    source: &PointBatch,
    target: &PointBatch,
    f: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<CostMatrix> {
    check_batches(source, target)?;
    let n = source.len();
    let mut entries = Vec::with_capacity(n * n);
    for a in source.rows() {
        for b in target.rows() {
            entries.push(f(a, b));
        }
    }
    CostMatrix::new(n, entries)
}

/// Pairwise least-action costs between a source and a target batch.
pub fn cost_matrix(
    spec: &LagrangianSpec,
    source: &PointBatch,
    target: &PointBatch,
) -> Result<CostMatrix> {
    spec.validate()?;
    if let Some(d) = spec.dimension() {
        if d != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: source.dim(),
            });
        }
    }
    check_batches(source, target)?;
    let d = source.dim();
    match spec {
        LagrangianSpec::FreeParticle => pairwise(source, target, |a, b| 0.5 * dist_sq(a, b)),
        LagrangianSpec::Harmonic { omega } if *omega < SMALL_OMEGA => {
            pairwise(source, target, |a, b| 0.5 * dist_sq(a, b))
        }
        LagrangianSpec::Harmonic { omega } => {
            modal_cost_matrix(&vec![phi(*omega); d], &vec![psi(*omega); d], source, target)
        }
        LagrangianSpec::Anisotropic { potential } => {
            // In the eigenframe the cost is a sum of independent harmonic modes.
            let rotate = |b: &PointBatch| -> PointBatch {
                let mut out = PointBatch::zeros(b.len(), d);
                for (i, r) in b.rows().enumerate() {
                    out.row_mut(i).copy_from_slice(&potential.to_frame(r));
                }
                out
            };
            let w = potential.frequencies();
            let phis: Vec<f64> = w.iter().map(|&w| phi(w)).collect();
            let psis: Vec<f64> = w.iter().map(|&w| psi(w)).collect();
            modal_cost_matrix(&phis, &psis, &rotate(source), &rotate(target))
        }
    }
}

/// `Σ_k ½Φ_k(a_k² + b_k²) − Ψ_k a_k b_k` for every pair of rows.
fn modal_cost_matrix(
    phis: &[f64],
    psis: &[f64],
    source: &PointBatch,
    target: &PointBatch,
) -> Result<CostMatrix> {
    let half_norm = |r: &[f64]| -> f64 {
        0.5 * r.iter().zip(phis).map(|(x, p)| p * x * x).sum::<f64>()
    };
    let qs: Vec<f64> = source.rows().map(half_norm).collect();
    let qt: Vec<f64> = target.rows().map(half_norm).collect();
    let n = source.len();
    let mut entries = Vec::with_capacity(n * n);
    for (a, &qa) in source.rows().zip(&qs) {
        let scaled: Vec<f64> = a.iter().zip(psis).map(|(x, p)| x * p).collect();
        for (b, &qb) in target.rows().zip(&qt) {
            entries.push(qa + qb - dot(&scaled, b));
        }
    }
    CostMatrix::new(n, entries)
}

/// Pairwise harmonic-geodesic kinetic energies `k_ω(x0_i, x1_j)`.
pub fn kinetic_cost_matrix(
    omega: f64,
    source: &PointBatch,
    target: &PointBatch,
) -> Result<CostMatrix> {
    LagrangianSpec::harmonic(omega)?;
    pairwise(source, target, |a, b| {
        pair_kinetic_energy_unchecked(omega, a, b)
    })
}

/// Pairwise `½(x0 − x1)ᵀ W (x0 − x1)` for a symmetric row-major `weight`.
pub fn weighted_quadratic_cost_matrix(
    weight: &[f64],
    source: &PointBatch,
    target: &PointBatch,
) -> Result<CostMatrix> {
    let d = source.dim();
    if weight.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: weight.len(),
        });
    }
    pairwise(source, target, |a, b| {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += diff[i] * weight[i * d + j] * diff[j];
            }
        }
        0.5 * s
    })
}

/// Minimum-cost perfect matching, `O(n³)`.
///
/// Hungarian-family shortest-augmenting-path solver (Jonker–Volgenant).
/// Deterministic: ties are broken by a fixed scan order, so the result
/// depends only on the matrix.
pub fn solve_assignment(m: &CostMatrix) -> Result<CouplingPlan> {
    if m.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    let n = m.n;
    if n <= 1 {
        return Ok(plan_from(m, (0..n).collect()));
    }
    Ok(plan_from(m, crate::lap::solve(n, &m.entries)))
}

/// Exact mini-batch OT coupling of `source` and `target` under the action
/// cost of `spec`.
pub fn couple(
    spec: &LagrangianSpec,
    source: &PointBatch,
    target: &PointBatch,
) -> Result<CouplingPlan> {
    let m = cost_matrix(spec, source, target)?;
    if m.size() == 1 {
        return Ok(CouplingPlan::identity(&m));
    }
    solve_assignment(&m)
}
