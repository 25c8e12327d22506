//! Closed-form least-action objects.
//!
//! Three Lagrangian families are supported, all of the form
//! `L(x, v) = ½‖v‖² − ½ xᵀAx`:
//!
//! * free particle, `A = 0`: affine interpolation, quadratic cost;
//! * isotropic harmonic, `A = ω²I` with `0 < ω < π`;
//! * anisotropic harmonic, `A = Q diag(ω_k²) Qᵀ` with every `ω_k ∈ (0, π)`.
//!
//! For the harmonic families the Euler–Lagrange equation `γ̈ + Aγ = 0`
//! decouples into scalar oscillators along the eigendirections of `A`, so
//! every quantity here (trajectory, velocity, action cost, matrix functions
//! of `A`) is evaluated mode by mode from the stored spectral data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::batch::{dist_sq, dot, norm_sq, PointBatch};
use crate::error::{Error, Result};
use crate::linalg::{orthogonality_defect, symmetric_eigen};

/// Frequencies below this are evaluated with the free-particle formulas.
pub const SMALL_OMEGA: f64 = 1e-6;

/// Frequencies must stay this far below `π`, where `sin ω` vanishes.
pub const PERIOD_MARGIN: f64 = 1e-6;

const ORTHOGONALITY_TOL: f64 = 1e-10;

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 && omega < PI - PERIOD_MARGIN {
        Ok(())
    } else {
        Err(Error::FrequencyOutOfRange(omega))
    }
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

/// Per-mode interpolation coefficients of a one-dimensional oscillator at
/// frequency `omega`: `γ(t) = a(t) x0 + b(t) x1`.
#[derive(Debug, Clone, Copy)]
struct Mode {
    a: f64,
    b: f64,
    da: f64,
    db: f64,
}

impl Mode {
    fn at(omega: f64, t: f64) -> Self {
        if omega < SMALL_OMEGA {
            return Self {
                a: 1.0 - t,
                b: t,
                da: -1.0,
                db: 1.0,
            };
        }
        let s = omega.sin();
        Self {
            a: (omega * (1.0 - t)).sin() / s,
            b: (omega * t).sin() / s,
            da: -omega * (omega * (1.0 - t)).cos() / s,
            db: omega * (omega * t).cos() / s,
        }
    }
}

/// `ω cot ω`, the diagonal weight of the action cost; 1 in the free limit.
pub(crate) fn phi(omega: f64) -> f64 {
    if omega < SMALL_OMEGA {
        1.0
    } else {
        omega * omega.cos() / omega.sin()
    }
}

/// `ω csc ω`, the cross weight of the action cost; 1 in the free limit.
pub(crate) fn psi(omega: f64) -> f64 {
    if omega < SMALL_OMEGA {
        1.0
    } else {
        omega / omega.sin()
    }
}

/// Anisotropic quadratic potential `A = Q diag(ω_k²) Qᵀ` held by its
/// spectral data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralRepr", into = "SpectralRepr")]
pub struct SpectralPotential {
    dimension: usize,
    /// Row-major `d x d`; column `k` is the `k`-th eigendirection.
    frame: Vec<f64>,
    frequencies: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpectralRepr {
    dimension: usize,
    frame: Vec<f64>,
    frequencies: Vec<f64>,
}

impl TryFrom<SpectralRepr> for SpectralPotential {
    type Error = Error;

    fn try_from(r: SpectralRepr) -> Result<Self> {
        if r.frame.len() != r.dimension * r.dimension {
            return Err(Error::DimensionMismatch {
                expected: r.dimension * r.dimension,
                got: r.frame.len(),
            });
        }
        Self::new(r.frame, r.frequencies)
    }
}

impl From<SpectralPotential> for SpectralRepr {
    fn from(p: SpectralPotential) -> Self {
        Self {
            dimension: p.dimension,
            frame: p.frame,
            frequencies: p.frequencies,
        }
    }
}

impl SpectralPotential {
    /// Builds a potential from a row-major orthogonal frame whose columns are
    /// eigendirections, and one frequency per column.
    pub fn new(frame: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        let d = frequencies.len();
        if d == 0 {
            return Err(Error::InvalidConfig("potential dimension must be positive".into()));
        }
        if frame.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: frame.len(),
            });
        }
        for &w in &frequencies {
            check_omega(w)?;
        }
        let defect = orthogonality_defect(&frame, d);
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(Error::NonOrthogonalFrame(defect));
        }
        Ok(Self {
            dimension: d,
            frame,
            frequencies,
        })
    }

    /// `A = ω² I` in the standard frame.
    pub fn isotropic(dimension: usize, omega: f64) -> Result<Self> {
        Self::diagonal(vec![omega; dimension])
    }

    /// Axis-aligned `A = diag(ω_k²)`.
    pub fn diagonal(frequencies: Vec<f64>) -> Result<Self> {
        let d = frequencies.len();
        Self::new(crate::linalg::identity(d), frequencies)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Coordinates of `x` in the eigenframe, `Qᵀx`.
    pub fn to_frame(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        (0..d)
            .map(|k| (0..d).map(|i| self.frame[i * d + k] * x[i]).sum())
            .collect()
    }

    /// Back to the ambient frame, `Qy`.
    pub fn from_frame(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        (0..d)
            .map(|i| dot(&self.frame[i * d..(i + 1) * d], y))
            .collect()
    }

    /// `Q diag(f(ω_k)) Qᵀ`, row-major.
    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let d = self.dimension;
        let diag: Vec<f64> = self.frequencies.iter().map(|&w| f(w)).collect();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d)
                    .map(|k| self.frame[i * d + k] * diag[k] * self.frame[j * d + k])
                    .sum();
            }
        }
        out
    }

    /// The potential matrix `A`.
    pub fn matrix(&self) -> Vec<f64> {
        self.matrix_function(|w| w * w)
    }

    /// `Φ(A) = √A cot √A`.
    pub fn phi_matrix(&self) -> Vec<f64> {
        self.matrix_function(phi)
    }

    /// `Ψ(A) = √A csc √A`.
    pub fn psi_matrix(&self) -> Vec<f64> {
        self.matrix_function(psi)
    }
}

/// Which Lagrangian generates the interpolating paths and the coupling cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LagrangianSpec {
    FreeParticle,
    Harmonic { omega: f64 },
    Anisotropic { potential: SpectralPotential },
}

impl LagrangianSpec {
    pub fn harmonic(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Self::Harmonic { omega })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::FreeParticle => Ok(()),
            Self::Harmonic { omega } => check_omega(*omega),
            Self::Anisotropic { potential } => {
                for &w in potential.frequencies() {
                    check_omega(w)?;
                }
                Ok(())
            }
        }
    }

    /// The fixed dimension of the Lagrangian, if it has one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::Anisotropic { potential } => Some(potential.dimension()),
            _ => None,
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.dimension() {
            Some(expected) if expected != d => Err(Error::DimensionMismatch { expected, got: d }),
            _ => Ok(()),
        }
    }

    /// `L(x, v) = ½‖v‖² − ½ xᵀAx`.
    pub fn evaluate(&self, x: &[f64], v: &[f64]) -> f64 {
        let kinetic = 0.5 * norm_sq(v);
        match self {
            Self::FreeParticle => kinetic,
            Self::Harmonic { omega } => kinetic - 0.5 * omega * omega * norm_sq(x),
            Self::Anisotropic { potential } => {
                let y = potential.to_frame(x);
                let pot: f64 = y
                    .iter()
                    .zip(potential.frequencies())
                    .map(|(yk, w)| w * w * yk * yk)
                    .sum();
                kinetic - 0.5 * pot
            }
        }
    }
}

/// A pair of path endpoints of equal dimension.
#[derive(Debug, Clone, Copy)]
pub struct Endpoints<'a> {
    pub x0: &'a [f64],
    pub x1: &'a [f64],
}

impl<'a> Endpoints<'a> {
    pub fn new(x0: &'a [f64], x1: &'a [f64]) -> Result<Self> {
        if x0.len() != x1.len() {
            return Err(Error::DimensionMismatch {
                expected: x0.len(),
                got: x1.len(),
            });
        }
        Ok(Self { x0, x1 })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

/// Position and velocity of the least-action path at time `t`, written into
/// `pos` and `vel` (each of length `d`).
pub fn trajectory_state_into(
    spec: &LagrangianSpec,
    ep: Endpoints<'_>,
    t: f64,
    pos: &mut [f64],
    vel: &mut [f64],
) -> Result<()> {
    check_time(t)?;
    spec.validate()?;
    spec.check_dim(ep.dim())?;
    let d = ep.dim();
    if pos.len() != d || vel.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: pos.len().min(vel.len()),
        });
    }
    match spec {
        LagrangianSpec::FreeParticle | LagrangianSpec::Harmonic { .. } => {
            let omega = match spec {
                LagrangianSpec::Harmonic { omega } => *omega,
                _ => 0.0,
            };
            let m = Mode::at(omega, t);
            for k in 0..d {
                pos[k] = m.a * ep.x0[k] + m.b * ep.x1[k];
                vel[k] = m.da * ep.x0[k] + m.db * ep.x1[k];
            }
        }
        LagrangianSpec::Anisotropic { potential } => {
            let y0 = potential.to_frame(ep.x0);
            let y1 = potential.to_frame(ep.x1);
            let mut yp = vec![0.0; d];
            let mut yv = vec![0.0; d];
            for k in 0..d {
                let m = Mode::at(potential.frequencies[k], t);
                yp[k] = m.a * y0[k] + m.b * y1[k];
                yv[k] = m.da * y0[k] + m.db * y1[k];
            }
            pos.copy_from_slice(&potential.from_frame(&yp));
            vel.copy_from_slice(&potential.from_frame(&yv));
        }
    }
    Ok(())
}

/// `γ(t)` for the least-action path from `ep.x0` to `ep.x1`.
pub fn trajectory(spec: &LagrangianSpec, ep: Endpoints<'_>, t: f64) -> Result<Vec<f64>> {
    let mut pos = vec![0.0; ep.dim()];
    let mut vel = vec![0.0; ep.dim()];
    trajectory_state_into(spec, ep, t, &mut pos, &mut vel)?;
    Ok(pos)
}

/// `γ̇(t)` for the least-action path from `ep.x0` to `ep.x1`.
pub fn trajectory_velocity(spec: &LagrangianSpec, ep: Endpoints<'_>, t: f64) -> Result<Vec<f64>> {
    let mut pos = vec![0.0; ep.dim()];
    let mut vel = vec![0.0; ep.dim()];
    trajectory_state_into(spec, ep, t, &mut pos, &mut vel)?;
    Ok(vel)
}

/// The least-action cost `c_L(x0, x1)`: the action of the optimal path.
///
/// * free particle: `½‖x1 − x0‖²`
/// * harmonic: `ω/(2 sin ω) [cos ω (‖x0‖² + ‖x1‖²) − 2 x0·x1]`
/// * anisotropic: `½x0ᵀΦx0 + ½x1ᵀΦx1 − x0ᵀΨx1`
pub fn action_cost(spec: &LagrangianSpec, ep: Endpoints<'_>) -> Result<f64> {
    spec.validate()?;
    spec.check_dim(ep.dim())?;
    Ok(action_cost_unchecked(spec, ep.x0, ep.x1))
}

pub(crate) fn action_cost_unchecked(spec: &LagrangianSpec, x0: &[f64], x1: &[f64]) -> f64 {
    match spec {
        LagrangianSpec::FreeParticle => 0.5 * dist_sq(x0, x1),
        LagrangianSpec::Harmonic { omega } => {
            if *omega < SMALL_OMEGA {
                0.5 * dist_sq(x0, x1)
            } else {
                0.5 * phi(*omega) * (norm_sq(x0) + norm_sq(x1)) - psi(*omega) * dot(x0, x1)
            }
        }
        LagrangianSpec::Anisotropic { potential } => {
            let y0 = potential.to_frame(x0);
            let y1 = potential.to_frame(x1);
            potential
                .frequencies
                .iter()
                .enumerate()
                .map(|(k, &w)| {
                    0.5 * phi(w) * (y0[k] * y0[k] + y1[k] * y1[k]) - psi(w) * y0[k] * y1[k]
                })
                .sum()
        }
    }
}

/// The trigonometric integrals `(I_ss, I_cc, I_sc)` of `sin²`, `cos²` and
/// `sin·cos` of `ωt` over `[0, 1]`.
pub fn trig_integrals(omega: f64) -> (f64, f64, f64) {
    let r = (2.0 * omega).sin() / (4.0 * omega);
    let s = omega.sin();
    (0.5 - r, 0.5 + r, s * s / (2.0 * omega))
}

/// Kinetic energy `k_ω(x0, x1) = ∫₀¹ ½‖γ̇‖² dt` of the harmonic geodesic at
/// frequency `omega`.
///
/// With `B = (x1 − cos ω x0)/sin ω` the geodesic is `cos(ωt) x0 + sin(ωt) B`
/// and
/// `k_ω = (ω²/2) [‖x0‖² I_ss + ‖B‖² I_cc − 2 (x0·B) I_sc]`.
pub fn pair_kinetic_energy(omega: f64, ep: Endpoints<'_>) -> Result<f64> {
    check_omega(omega)?;
    Ok(pair_kinetic_energy_unchecked(omega, ep.x0, ep.x1))
}

pub(crate) fn pair_kinetic_energy_unchecked(omega: f64, x0: &[f64], x1: &[f64]) -> f64 {
    if omega < SMALL_OMEGA {
        return 0.5 * dist_sq(x0, x1);
    }
    let (s, c) = omega.sin_cos();
    let (i_ss, i_cc, i_sc) = trig_integrals(omega);
    let mut x0_sq = 0.0;
    let mut b_sq = 0.0;
    let mut x0_b = 0.0;
    for (&a, &y) in x0.iter().zip(x1) {
        let b = (y - c * a) / s;
        x0_sq += a * a;
        b_sq += b * b;
        x0_b += a * b;
    }
    0.5 * omega * omega * (x0_sq * i_ss + b_sq * i_cc - 2.0 * x0_b * i_sc)
}

/// Fits an anisotropic potential to the principal axes of `data`.
///
/// The frame is the covariance eigenbasis (variances `λ_1 ≥ … ≥ λ_d`) and
/// the frequencies are `ω_k = omega_max (λ_d / λ_k)^alpha`, so high-variance
/// directions get the smallest frequencies.
pub fn pca_potential(data: &PointBatch, omega_max: f64, alpha: f64) -> Result<SpectralPotential> {
    check_omega(omega_max)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let d = data.dim();
    if data.len() < d + 1 {
        return Err(Error::NotEnoughPoints {
            needed: d + 1,
            got: data.len(),
        });
    }
    let cov = data.covariance();
    let (values, vectors) = symmetric_eigen(&cov, d);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    for &lambda in &values {
        if !(lambda > 1e-12 * trace) {
            return Err(Error::DegenerateCovariance {
                eigenvalue: lambda,
                trace,
            });
        }
    }
    let smallest = values[d - 1];
    let frequencies = values
        .iter()
        .map(|&lambda| omega_max * (smallest / lambda).powf(alpha))
        .collect();
    SpectralPotential::new(vectors, frequencies)
}
