//! Explicit Runge–Kutta integration of a velocity field over `t ∈ [0, 1]`.
//!
//! Points are advanced jointly: fixed-step methods share one step sequence
//! and the adaptive method controls the error of the whole batch at once, so
//! one field evaluation advances every point and `nfe` is a per-sample count.

use serde::{Deserialize, Serialize};

use crate::batch::PointBatch;
use crate::error::{Error, Result};
use crate::neuralnet::VelocityModel;

/// A time-dependent velocity field on `R^d`, evaluated on a batch of points.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes `v(x_i, t)` for every row of `xs` (row-major `n x d`) into `out`.
    fn eval(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()>;
}

impl VectorField for VelocityModel {
    fn dim(&self) -> usize {
        VelocityModel::dim(self)
    }

    fn eval(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        let n = xs.len() / self.dim();
        let v = self.forward_batch(xs, &vec![t; n])?;
        out.copy_from_slice(&v);
        Ok(())
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval(t, xs, out)
    }
}

/// A field given pointwise by a closure `f(t, x, out)`.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        for (x, o) in xs.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            (self.f)(t, x, o);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Midpoint,
    Rk4,
    /// Dormand–Prince 5(4) with PI step-size control.
    Adaptive,
}

impl Method {
    /// Field evaluations per step of a fixed-step method.
    pub fn evals_per_step(self) -> usize {
        match self {
            Self::Euler => 1,
            Self::Midpoint => 2,
            Self::Rk4 => 4,
            Self::Adaptive => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Euler => "euler",
            Self::Midpoint => "midpoint",
            Self::Rk4 => "rk4",
            Self::Adaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "midpoint" => Ok(Self::Midpoint),
            "rk4" => Ok(Self::Rk4),
            "adaptive" | "dopri5" => Ok(Self::Adaptive),
            _ => Err(Error::InvalidConfig(format!("unknown solver `{s}`"))),
        }
    }
}

fn default_tol() -> f64 {
    1e-5
}

/// Solver choice. Fixed-step methods take `nfe / k` equal steps, where `k`
/// is [`Method::evals_per_step`]; the adaptive method uses `rtol`/`atol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    pub method: Method,
    #[serde(default)]
    pub nfe: usize,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    /// Keep the state after every accepted step.
    #[serde(default)]
    pub record: bool,
}

impl SolveSpec {
    pub fn fixed(method: Method, nfe: usize) -> Self {
        Self {
            method,
            nfe,
            rtol: default_tol(),
            atol: default_tol(),
            record: false,
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Adaptive,
            nfe: 0,
            rtol,
            atol,
            record: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Adaptive => {
                if !(self.rtol > 0.0 && self.atol > 0.0) {
                    return Err(Error::InvalidConfig("tolerances must be positive".into()));
                }
            }
            m => {
                let k = m.evals_per_step();
                if self.nfe == 0 || self.nfe % k != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "NFE budget {} is not a positive multiple of {k} for {}",
                        self.nfe,
                        m.as_str()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Terminal states, the number of (batched) field evaluations, and the
/// optional state grid.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub states: PointBatch,
    pub nfe: usize,
    pub times: Vec<f64>,
    pub trajectory: Vec<PointBatch>,
}

pub const ADAPTIVE_H0: f64 = 0.01;
pub const ADAPTIVE_H_MAX: f64 = 0.5;
pub const ADAPTIVE_SAFETY: f64 = 0.9;
pub const ADAPTIVE_H_MIN: f64 = 1e-12;

struct Counter<'a, F: VectorField> {
    field: &'a F,
    nfe: usize,
}

impl<F: VectorField> Counter<'_, F> {
    fn eval(&mut self, t: f64, xs: &[f64], out: &mut [f64]) -> Result<()> {
        self.nfe += 1;
        self.field.eval(t, xs, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("velocity field"));
        }
        Ok(())
    }
}

fn axpy(out: &mut [f64], base: &[f64], terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut s = base[i];
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = s;
    }
}

/// Integrates `ẋ = field(x, t)` from `t = 0` to `t = 1` starting at `x0`.
pub fn integrate<F: VectorField>(field: &F, x0: &PointBatch, spec: &SolveSpec) -> Result<SolveResult> {
    spec.validate()?;
    if x0.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x0.dim(),
        });
    }
    let mut counter = Counter { field, nfe: 0 };
    let mut result = SolveResult {
        states: x0.clone(),
        nfe: 0,
        times: Vec::new(),
        trajectory: Vec::new(),
    };
    if x0.is_empty() {
        return Ok(result);
    }
    if spec.record {
        result.times.push(0.0);
        result.trajectory.push(x0.clone());
    }
    match spec.method {
        Method::Adaptive => dopri5(&mut counter, &mut result, spec)?,
        m => fixed_step(&mut counter, &mut result, m, spec)?,
    }
    result.nfe = counter.nfe;
    Ok(result)
}

fn fixed_step<F: VectorField>(
    f: &mut Counter<'_, F>,
    res: &mut SolveResult,
    method: Method,
    spec: &SolveSpec,
) -> Result<()> {
    let steps = spec.nfe / method.evals_per_step();
    let h = 1.0 / steps as f64;
    let len = res.states.as_slice().len();
    let mut x = res.states.as_slice().to_vec();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    for step in 0..steps {
        let t = step as f64 * h;
        match method {
            Method::Euler => {
                f.eval(t, &x, &mut k1)?;
                x.iter_mut().zip(&k1).for_each(|(xi, ki)| *xi += h * ki);
            }
            Method::Midpoint => {
                f.eval(t, &x, &mut k1)?;
                axpy(&mut tmp, &x, &[(0.5 * h, &k1)]);
                f.eval(t + 0.5 * h, &tmp, &mut k2)?;
                x.iter_mut().zip(&k2).for_each(|(xi, ki)| *xi += h * ki);
            }
            Method::Rk4 => {
                f.eval(t, &x, &mut k1)?;
                axpy(&mut tmp, &x, &[(0.5 * h, &k1)]);
                f.eval(t + 0.5 * h, &tmp, &mut k2)?;
                axpy(&mut tmp, &x, &[(0.5 * h, &k2)]);
                f.eval(t + 0.5 * h, &tmp, &mut k3)?;
                axpy(&mut tmp, &x, &[(h, &k3)]);
                f.eval(t + h, &tmp, &mut k4)?;
                for i in 0..len {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            Method::Adaptive => unreachable!(),
        }
        if spec.record {
            res.times.push(if step + 1 == steps { 1.0 } else { (step + 1) as f64 * h });
            res.trajectory.push(PointBatch::new(res.states.dim(), x.clone())?);
        }
    }
    res.states = PointBatch::new(res.states.dim(), x)?;
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5<F: VectorField>(f: &mut Counter<'_, F>, res: &mut SolveResult, spec: &SolveSpec) -> Result<()> {
    let len = res.states.as_slice().len();
    let dim = res.states.dim();
    let mut x = res.states.as_slice().to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; len]; 7];
    let mut stage = vec![0.0; len];
    let mut x_new = vec![0.0; len];

    let mut t = 0.0f64;
    let mut h = ADAPTIVE_H0;
    let mut err_prev = 1e-4f64;
    f.eval(t, &x, &mut k[0])?;

    while t < 1.0 {
        if 1.0 - t < h {
            h = 1.0 - t;
        }
        if h < ADAPTIVE_H_MIN {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, coeffs) in rows.iter().enumerate() {
            let s = s + 1;
            {
                let terms: Vec<(f64, &[f64])> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| (h * a, k[j].as_slice()))
                    .collect();
                axpy(&mut stage, &x, &terms);
            }
            f.eval(t + C[s] * h, &stage, &mut k[s])?;
        }
        {
            let terms: Vec<(f64, &[f64])> = B
                .iter()
                .enumerate()
                .map(|(j, &b)| (h * b, k[j].as_slice()))
                .collect();
            axpy(&mut x_new, &x, &terms);
        }
        f.eval(t + h, &x_new, &mut k[6])?;

        let mut acc = 0.0;
        for i in 0..len {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let scale = spec
                .atol
                .max(spec.rtol * x[i].abs().max(x_new[i].abs()));
            acc += (e / scale) * (e / scale);
        }
        let err = (acc / len as f64).sqrt();

        if err <= 1.0 {
            t = if 1.0 - (t + h) < 1e-14 { 1.0 } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            k.swap(0, 6);
            if spec.record {
                res.times.push(t);
                res.trajectory.push(PointBatch::new(dim, x.clone())?);
            }
            let fac = if err == 0.0 {
                10.0
            } else {
                (ADAPTIVE_SAFETY * err.powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 10.0)
            };
            err_prev = err.max(1e-4);
            h = (h * fac).min(ADAPTIVE_H_MAX);
        } else {
            let fac = (ADAPTIVE_SAFETY * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
    res.states = PointBatch::new(dim, x)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn growth() -> FnField<impl Fn(f64, &[f64], &mut [f64])> {
        FnField::new(1, |_t, x: &[f64], o: &mut [f64]| o[0] = x[0])
    }

    #[test]
    fn euler_one_step() {
        let x0 = PointBatch::new(1, vec![1.0]).unwrap();
        let r = integrate(&growth(), &x0, &SolveSpec::fixed(Method::Euler, 1)).unwrap();
        assert_eq!(r.states.as_slice(), &[2.0]);
        assert_eq!(r.nfe, 1);
    }

    #[test]
    fn rk4_one_step() {
        let x0 = PointBatch::new(1, vec![1.0]).unwrap();
        let r = integrate(&growth(), &x0, &SolveSpec::fixed(Method::Rk4, 4)).unwrap();
        let expected = 1.0 + 1.0 + 0.5 + 1.0 / 6.0 + 1.0 / 24.0;
        assert!((r.states.as_slice()[0] - expected).abs() < 1e-15);
        assert_eq!(r.nfe, 4);
    }

    #[test]
    fn budget_validation() {
        let x0 = PointBatch::new(1, vec![1.0]).unwrap();
        assert!(integrate(&growth(), &x0, &SolveSpec::fixed(Method::Rk4, 6)).is_err());
        assert!(integrate(&growth(), &x0, &SolveSpec::fixed(Method::Euler, 0)).is_err());
        assert!(integrate(&growth(), &x0, &SolveSpec::adaptive(0.0, 1e-5)).is_err());
    }

    #[test]
    fn adaptive_exponential() {
        let x0 = PointBatch::new(1, vec![1.0, 2.0]).unwrap();
        let r = integrate(&growth(), &x0, &SolveSpec::adaptive(1e-8, 1e-8)).unwrap();
        let e = std::f64::consts::E;
        assert!((r.states.as_slice()[0] - e).abs() < 1e-6);
        assert!((r.states.as_slice()[1] - 2.0 * e).abs() < 1e-6);
        assert_eq!((r.nfe - 1) % 6, 0);
    }

    #[test]
    fn recording_grid() {
        let x0 = PointBatch::new(1, vec![1.0]).unwrap();
        let r = integrate(&growth(), &x0, &SolveSpec::fixed(Method::Midpoint, 8).recording()).unwrap();
        assert_eq!(r.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(r.trajectory.len(), 5);
        assert_eq!(r.trajectory[4], r.states);
    }

    #[test]
    fn empty_batch() {
        let x0 = PointBatch::zeros(0, 1);
        let r = integrate(&growth(), &x0, &SolveSpec::fixed(Method::Rk4, 8)).unwrap();
        assert!(r.states.is_empty());
        assert_eq!(r.nfe, 0);
    }

    #[test]
    fn non_finite_field_is_an_error() {
        let f = FnField::new(1, |_t, _x: &[f64], o: &mut [f64]| o[0] = f64::NAN);
        let x0 = PointBatch::new(1, vec![1.0]).unwrap();
        assert!(integrate(&f, &x0, &SolveSpec::fixed(Method::Euler, 2)).is_err());
    }
}
