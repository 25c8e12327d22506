//! The subcommands, callable without the binary.

use std::fs;
use std::path::{Path, PathBuf};

use lagflow::metrics::{evaluate, wasserstein2};
use lagflow::odesolve::SolveResult;
use lagflow::synthdata::sample;
use lagflow::trainer::{streams, train_with_observer, TrainOutcome};
use lagflow::{
    integrate, DatasetSpec, EvalProtocol, EvalReport, LagrangianSpec, Method, PointBatch, Sampler,
    SolveSpec, VectorField, VelocityModel,
};
use rayon::prelude::*;

use crate::checkpoint::{Checkpoint, CheckpointHeader};
use crate::config::{save_json, RunConfig, SweepAxis, SweepSpec};
use crate::error::{io_err, CliError, Result};
use crate::plot::{self, Series};
use crate::tables::{self, SweepRow};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "LAGFLOW_WORKERS";

/// Points drawn in the trajectory figure written after training.
const PLOT_POINTS: usize = 256;

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub final_eval: Option<EvalReport>,
    pub log_rows: usize,
}

/// Trains one run and writes its directory:
/// `config.json`, `checkpoint.bin`, `train_log.csv`, `eval.csv`,
/// `eval.json` and `plots/`.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    create_dir(&dir.join("plots"))?;
    save_json(&dir.join("config.json"), cfg)?;

    let t = &cfg.train;
    let outcome: TrainOutcome = train_with_observer(t, |_, model| {
        evaluate(model, &t.source, &t.target, &cfg.eval, cfg.eval_seed).ok()
    })?;
    let (model, ema_decay) = match outcome.ema {
        Some(ema) => (ema, t.ema_decay),
        None => (outcome.model, None),
    };
    let checkpoint = Checkpoint {
        header: CheckpointHeader {
            architecture: t.architecture,
            lagrangian: t.lagrangian.clone(),
            seed: t.seed,
            steps: t.steps,
            source: t.source.clone(),
            target: t.target.clone(),
            ema_decay,
            param_count: model.params().len(),
        },
        model,
    };
    checkpoint.save(&dir.join("checkpoint.bin"))?;
    tables::write_train_log(&dir.join("train_log.csv"), &outcome.records, t.eval_every > 0)?;
    if !outcome.records.is_empty() {
        let steps: Vec<f64> = outcome.records.iter().map(|r| r.step as f64).collect();
        let loss: Vec<f64> = outcome.records.iter().map(|r| r.loss).collect();
        let svg = plot::metric_svg(
            "Training loss",
            "step",
            "loss",
            &[Series {
                name: "loss".into(),
                std: vec![0.0; loss.len()],
                x: steps,
                mean: loss,
            }],
            false,
        );
        plot::save(&dir.join("plots/loss.svg"), &svg)?;
    }

    let final_eval = if cfg.final_eval {
        let report = eval(
            &checkpoint,
            &cfg.eval,
            cfg.eval_seed,
            Some(&dir.join("eval.csv")),
            Some(&dir.join("eval.json")),
        )?;
        let traj = generate(
            &checkpoint,
            &cfg.eval.solver.recording(),
            PLOT_POINTS,
            cfg.eval_seed,
        )?;
        let target = DatasetSpec { seed: cfg.eval_seed, ..t.target.clone() };
        let target = Sampler::with_stream(target, streams::EVAL_TARGET)?.sample(cfg.eval.n_eval);
        write_trajectory_figure(&dir.join("plots"), "trajectories", &traj, &target, &run_title(&checkpoint.header))?;
        Some(report)
    } else {
        None
    };

    Ok(TrainSummary {
        output_dir: dir.clone(),
        log_rows: outcome.records.len(),
        checkpoint,
        final_eval,
    })
}

fn run_title(h: &CheckpointHeader) -> String {
    let l = match &h.lagrangian {
        LagrangianSpec::FreeParticle => "free particle".to_string(),
        LagrangianSpec::Harmonic { omega } => format!("harmonic ω={omega}"),
        LagrangianSpec::Anisotropic { potential } => {
            format!("anisotropic ω={:?}", potential.frequencies())
        }
    };
    format!("{} → {}, {l}", h.source.name, h.target.name)
}

/// Writes `<stem>.svg` and the underlying `<stem>.csv` into `dir`.
pub fn write_trajectory_figure(
    dir: &Path,
    stem: &str,
    result: &SolveResult,
    target: &PointBatch,
    title: &str,
) -> Result<()> {
    tables::write_trajectories(&dir.join(format!("{stem}.csv")), &result.times, &result.trajectory)?;
    let svg = plot::trajectory_svg(title, target, &result.trajectory, PLOT_POINTS);
    plot::save(&dir.join(format!("{stem}.svg")), &svg)
}

/// Integrates `n` fresh source samples drawn under `seed` through the model.
pub fn generate(ckpt: &Checkpoint, solver: &SolveSpec, n: usize, seed: u64) -> Result<SolveResult> {
    solver.validate()?;
    let source = DatasetSpec { seed, ..ckpt.header.source.clone() };
    let x0 = Sampler::with_stream(source, streams::EVAL_SOURCE)?.sample(n);
    if n == 0 {
        return Ok(SolveResult {
            states: x0,
            nfe: 0,
            times: Vec::new(),
            trajectory: Vec::new(),
        });
    }
    Ok(integrate(&ckpt.model, &x0, solver)?)
}

/// Evaluates a checkpoint; see [`eval_field`].
pub fn eval(
    ckpt: &Checkpoint,
    protocol: &EvalProtocol,
    seed: u64,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> Result<EvalReport> {
    let h = &ckpt.header;
    eval_field(&ckpt.model, &h.source, &h.target, protocol, seed, csv, json)
}

/// Evaluates any velocity field and writes the report as a one-row CSV
/// and/or JSON.
pub fn eval_field<F: VectorField>(
    field: &F,
    source: &DatasetSpec,
    target: &DatasetSpec,
    protocol: &EvalProtocol,
    seed: u64,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> Result<EvalReport> {
    let report = evaluate(field, source, target, protocol, seed)?;
    if let Some(p) = csv {
        tables::write_eval(p, std::slice::from_ref(&report))?;
    }
    if let Some(p) = json {
        save_json(p, &report)?;
    }
    Ok(report)
}

/// W2 of generated samples against held-out targets, without path energy.
pub fn sample_quality(
    model: &VelocityModel,
    source: &DatasetSpec,
    target: &DatasetSpec,
    solver: &SolveSpec,
    n: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let x0 = Sampler::with_stream(DatasetSpec { seed, ..source.clone() }, streams::EVAL_SOURCE)?.sample(n);
    let x1 = Sampler::with_stream(DatasetSpec { seed, ..target.clone() }, streams::EVAL_TARGET)?.sample(n);
    let out = integrate(model, &x0, solver)?;
    Ok((wasserstein2(&out.states, &x1)?, out.nfe))
}

pub fn dump_data(spec: &DatasetSpec, n: usize, path: &Path) -> Result<()> {
    let points = sample(spec, n)?;
    tables::write_points(path, spec.dimension, &points)
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Run config of one sweep cell.
pub fn cell_config(spec: &SweepSpec, value: f64, seed: u64, dir: &Path) -> RunConfig {
    let mut cfg = spec.base.clone();
    cfg.train = cfg.train.with_seed(seed);
    match spec.axis {
        SweepAxis::Omega => {
            cfg.train.lagrangian = if value == 0.0 {
                LagrangianSpec::FreeParticle
            } else {
                LagrangianSpec::Harmonic { omega: value }
            };
        }
        SweepAxis::OtBatchSize => {
            let n = value as usize;
            cfg.train.ot_batch_size = n;
            cfg.train.train_batch_size = cfg.train.train_batch_size.div_ceil(n) * n;
        }
        SweepAxis::Nfe => {}
    }
    cfg.output_dir = dir.join(cell_name(spec.axis, value, seed));
    cfg
}

fn cell_name(axis: SweepAxis, value: f64, seed: u64) -> String {
    match axis {
        SweepAxis::Nfe => format!("seed={seed}"),
        _ => format!("{}={value}/seed={seed}", axis.as_str()),
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<tables::SummaryRow>,
}

/// Runs every (value × seed) cell on `workers` threads, each in its own
/// subdirectory of `dir`, then writes `sweep.json`, `results.csv`,
/// `summary.csv` and `plots/`.
///
/// An NFE sweep trains one model per seed and evaluates it with every
/// method at every budget.
pub fn sweep(spec: &SweepSpec, dir: &Path, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    if spec.axis == SweepAxis::Nfe {
        for &m in &spec.methods {
            for &v in &spec.values {
                SolveSpec::fixed(m, v as usize).validate()?;
            }
        }
    }
    create_dir(&dir.join("plots"))?;
    save_json(&dir.join("sweep.json"), spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    let rows: Vec<SweepRow> = pool.install(|| -> Result<Vec<SweepRow>> {
        match spec.axis {
            SweepAxis::Nfe => {
                let per_seed: Vec<Vec<SweepRow>> = spec
                    .seeds
                    .par_iter()
                    .map(|&seed| nfe_cell(spec, dir, seed))
                    .collect::<Result<_>>()?;
                // value-major order, matching the other axes
                let mut rows: Vec<SweepRow> = per_seed.into_iter().flatten().collect();
                rows.sort_by(|a, b| a.value.total_cmp(&b.value));
                Ok(rows)
            }
            _ => {
                let cells: Vec<(f64, u64)> = spec
                    .values
                    .iter()
                    .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
                    .collect();
                cells
                    .par_iter()
                    .map(|&(value, seed)| {
                        let cfg = RunConfig {
                            final_eval: true,
                            ..cell_config(spec, value, seed, dir)
                        };
                        let report = train(&cfg)?.final_eval.expect("final evaluation requested");
                        Ok(SweepRow {
                            axis: spec.axis.as_str().into(),
                            value,
                            seed,
                            method: cfg.eval.solver.method.as_str().into(),
                            w2: report.w2,
                            npe: report.npe,
                            coupling_excess: Some(report.coupling_excess),
                            path_excess: Some(report.path_excess),
                            nfe: report.nfe,
                        })
                    })
                    .collect()
            }
        }
    })?;

    tables::write_rows(&dir.join("results.csv"), &rows)?;
    let summary = tables::summarize(&rows);
    tables::write_rows(&dir.join("summary.csv"), &summary)?;
    write_sweep_plots(spec.axis, &summary, &dir.join("plots"))?;
    Ok(SweepOutcome { rows, summary })
}

fn nfe_cell(spec: &SweepSpec, dir: &Path, seed: u64) -> Result<Vec<SweepRow>> {
    let cfg = RunConfig {
        final_eval: false,
        ..cell_config(spec, 0.0, seed, dir)
    };
    let ckpt = train(&cfg)?.checkpoint;
    let h = &ckpt.header;
    let mut rows = Vec::new();
    for &value in &spec.values {
        for &method in &spec.methods {
            let solver = SolveSpec::fixed(method, value as usize);
            let (w2, nfe) = sample_quality(&ckpt.model, &h.source, &h.target, &solver, cfg.eval.n_eval, cfg.eval_seed)?;
            rows.push(SweepRow {
                axis: spec.axis.as_str().into(),
                value,
                seed,
                method: method.as_str().into(),
                w2,
                npe: None,
                coupling_excess: None,
                path_excess: None,
                nfe,
            });
        }
    }
    Ok(rows)
}

fn write_sweep_plots(axis: SweepAxis, summary: &[tables::SummaryRow], dir: &Path) -> Result<()> {
    let mut methods: Vec<&str> = Vec::new();
    for r in summary {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let log_x = axis != SweepAxis::Omega;
    let series = |pick: &dyn Fn(&tables::SummaryRow) -> Option<(f64, f64)>| -> Vec<Series> {
        methods
            .iter()
            .filter_map(|&m| {
                let mut s = Series { name: m.to_string(), x: vec![], mean: vec![], std: vec![] };
                let mut pts: Vec<(f64, f64, f64)> = summary
                    .iter()
                    .filter(|r| r.method == m)
                    .filter_map(|r| pick(r).map(|(mean, sd)| (r.value, mean, sd)))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (x, mean, sd) in pts {
                    s.x.push(x);
                    s.mean.push(mean);
                    s.std.push(sd);
                }
                (!s.x.is_empty()).then_some(s)
            })
            .collect()
    };
    let name = axis.as_str();
    let w2 = series(&|r| Some((r.w2_mean, r.w2_std)));
    plot::save(
        &dir.join(format!("w2_vs_{name}.svg")),
        &plot::metric_svg(&format!("W2 vs {name}"), name, "W2", &w2, log_x),
    )?;
    let npe = series(&|r| r.npe_mean.zip(r.npe_std));
    if !npe.is_empty() {
        plot::save(
            &dir.join(format!("npe_vs_{name}.svg")),
            &plot::metric_svg(&format!("NPE vs {name}"), name, "NPE", &npe, log_x),
        )?;
    }
    Ok(())
}

/// Reads a fixed-step or adaptive solver choice from CLI-style parts.
pub fn solver_from(method: Method, nfe: usize, rtol: f64, atol: f64) -> SolveSpec {
    match method {
        Method::Adaptive => SolveSpec::adaptive(rtol, atol),
        m => SolveSpec::fixed(m, nfe),
    }
}
