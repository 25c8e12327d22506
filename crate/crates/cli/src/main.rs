use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagflow::{DatasetName, DatasetSpec, LagrangianSpec, Method};
use lagflow_cli::commands::{self, WORKERS_ENV};
use lagflow_cli::config::load_json;
use lagflow_cli::{tables, Checkpoint, CliError, Result, RunConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "lagflow", version, about = "Lagrangian flow matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a velocity model and write a run directory.
    Train(TrainArgs),
    /// Sample from a checkpoint.
    Generate(GenerateArgs),
    /// Evaluate a checkpoint (W2 and path energy).
    Eval(EvalArgs),
    /// Run a grid of trainings or solver budgets and aggregate over seeds.
    Sweep(SweepArgs),
    /// Write samples of a synthetic dataset as CSV.
    DumpData(DumpArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run-config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Harmonic frequency; 0 selects the free particle.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    source: Option<DatasetName>,
    #[arg(long)]
    target: Option<DatasetName>,
    /// Seeds initialization, time sampling and both data streams.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    ot_batch_size: Option<usize>,
    #[arg(long)]
    train_batch_size: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    no_final_eval: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "rk4")]
    method: Method,
    /// Evaluation budget of a fixed-step method.
    #[arg(long, default_value_t = 128)]
    nfe: usize,
    #[arg(long, default_value_t = 1e-5)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-5)]
    atol: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(short, long, default_value_t = 2048)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Terminal points CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a trajectory SVG (and its CSV next to it).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Take the eval protocol and seed from this run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    n_npe: Option<usize>,
    #[arg(long)]
    omega_ref: Option<f64>,
    /// Inference solver; adaptive unless given.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, default_value_t = 128)]
    nfe: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV with a header and one row.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    /// Parallel cells; overrides the environment.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    dataset: DatasetName,
    #[arg(short, long, default_value_t = 2048)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only meaningful for the Gaussian.
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    #[arg(short, long)]
    output: PathBuf,
}

fn run_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    let t = &mut cfg.train;
    if let Some(seed) = a.seed {
        *t = t.clone().with_seed(seed);
    }
    if let Some(w) = a.omega {
        t.lagrangian = if w == 0.0 {
            LagrangianSpec::FreeParticle
        } else {
            LagrangianSpec::Harmonic { omega: w }
        };
    }
    if let Some(name) = a.source {
        t.source = DatasetSpec { name, ..t.source.clone() };
    }
    if let Some(name) = a.target {
        t.target = DatasetSpec { name, ..t.target.clone() };
    }
    macro_rules! set {
        ($($field:expr => $arg:expr),*) => { $(if let Some(v) = $arg { $field = v; })* };
    }
    set!(
        t.steps => a.steps,
        t.ot_batch_size => a.ot_batch_size,
        t.train_batch_size => a.train_batch_size,
        t.architecture.width => a.width,
        t.architecture.depth => a.depth,
        t.optimizer.lr => a.lr,
        t.log_every => a.log_every,
        t.eval_every => a.eval_every,
        cfg.output_dir => a.output_dir
    );
    if a.no_final_eval {
        cfg.final_eval = false;
    }
    if a.dry_run {
        cfg.validate()?;
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    let out = commands::train(&cfg)?;
    eprintln!("wrote {}", out.output_dir.display());
    if let Some(r) = out.final_eval {
        println!("{}", serde_json::to_string(&r).expect("report serializes"));
    }
    Ok(())
}

fn run_generate(a: GenerateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let s = &a.solver;
    let mut solver = commands::solver_from(s.method, s.nfe, s.rtol, s.atol);
    if a.plot.is_some() {
        solver = solver.recording();
    }
    let out = commands::generate(&ckpt, &solver, a.n, a.seed)?;
    tables::write_points(&a.output, ckpt.header.architecture.dim, &out.states)?;
    if let Some(svg) = &a.plot {
        let target = lagflow::synthdata::sample(
            &DatasetSpec { seed: a.seed, ..ckpt.header.target.clone() },
            a.n.max(512),
        )?;
        let dir = svg.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(".".as_ref());
        let stem = svg
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Usage(format!("bad plot path {}", svg.display())))?;
        let title = format!("{} → {}", ckpt.header.source.name, ckpt.header.target.name);
        commands::write_trajectory_figure(dir, stem, &out, &target, &title)?;
    }
    eprintln!("{} points, nfe {}", out.states.len(), out.nfe);
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let base = match &a.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    let mut protocol = base.eval;
    if let Some(n) = a.n_eval {
        protocol.n_eval = n;
    }
    if let Some(n) = a.n_npe {
        protocol.n_npe = n;
    }
    if let Some(w) = a.omega_ref {
        protocol.omega_ref = w;
    }
    if let Some(m) = a.method {
        protocol.solver = commands::solver_from(m, a.nfe, protocol.solver.rtol, protocol.solver.atol);
    }
    let seed = a.seed.unwrap_or(base.eval_seed);
    let report = commands::eval(&ckpt, &protocol, seed, a.csv.as_deref(), a.json.as_deref())?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let spec: SweepSpec = load_json(&a.spec)?;
    let workers = match a.workers {
        Some(0) => return Err(CliError::Usage(format!("{WORKERS_ENV} must be positive"))),
        Some(n) => n,
        None => commands::worker_count()?,
    };
    let out = commands::sweep(&spec, &a.output_dir, workers)?;
    for r in &out.summary {
        println!(
            "{}={} {}: W2 {:.4} ± {:.4}{}",
            r.axis,
            r.value,
            r.method,
            r.w2_mean,
            r.w2_std,
            match (r.npe_mean, r.npe_std) {
                (Some(m), Some(s)) => format!(", NPE {m:.4} ± {s:.4}"),
                _ => String::new(),
            }
        );
    }
    Ok(())
}

fn run_dump(a: DumpArgs) -> Result<()> {
    let spec = DatasetSpec {
        name: a.dataset,
        seed: a.seed,
        dimension: a.dimension,
    };
    commands::dump_data(&spec, a.n, &a.output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Generate(a) => run_generate(a),
        Command::Eval(a) => run_eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::DumpData(a) => run_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
