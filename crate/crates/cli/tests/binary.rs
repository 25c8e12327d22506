use std::path::Path;
use std::process::{Command, Output};

fn lagflow(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lagflow"));
    cmd.args(args).env_remove("LAGFLOW_WORKERS");
    if let Some(w) = workers {
        cmd.env("LAGFLOW_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dump_data_command() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("g.csv");
    ok(&lagflow(&["dump-data", "--dataset", "gaussian", "--dimension", "3", "-n", "5", "-o", s(&csv)], None));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1,x2"));
    assert_eq!(text.lines().count(), 6);

    let bad = lagflow(&["dump-data", "--dataset", "spiral", "-o", s(&csv)], None);
    assert!(!bad.status.success());
}

#[test]
fn train_generate_eval_round() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let args = [
        "train", "--steps", "5", "--width", "8", "--depth", "1", "--ot-batch-size", "16",
        "--train-batch-size", "32", "--omega", "0", "--target", "eightgaussians", "--seed", "2",
        "--no-final-eval", "--output-dir", s(&run),
    ];
    ok(&lagflow(&args, None));
    let ckpt = run.join("checkpoint.bin");
    let c = lagflow_cli::Checkpoint::load(&ckpt).unwrap();
    assert_eq!(c.header.lagrangian, lagflow::LagrangianSpec::FreeParticle);
    assert_eq!(c.header.target.name, lagflow::DatasetName::EightGaussians);
    assert_eq!((c.header.seed, c.header.target.seed), (2, 2));
    assert!(!run.join("eval.csv").exists());

    let pts = tmp.path().join("pts.csv");
    let svg = tmp.path().join("fig/traj.svg");
    std::fs::create_dir_all(svg.parent().unwrap()).unwrap();
    ok(&lagflow(
        &["generate", "--checkpoint", s(&ckpt), "--method", "midpoint", "--nfe", "8", "-n", "40", "-o", s(&pts), "--plot", s(&svg)],
        None,
    ));
    assert_eq!(std::fs::read_to_string(&pts).unwrap().lines().count(), 41);
    assert!(svg.is_file() && tmp.path().join("fig/traj.csv").is_file());

    let csv = tmp.path().join("eval.csv");
    let json = tmp.path().join("eval.json");
    let stdout = ok(&lagflow(
        &["eval", "--checkpoint", s(&ckpt), "--n-eval", "64", "--n-npe", "32", "--method", "rk4", "--nfe", "16", "--csv", s(&csv), "--json", s(&json)],
        None,
    ));
    let report: lagflow::EvalReport = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!((report.n_eval, report.n_npe, report.nfe), (64, 32, 16));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1), Some(report.csv_row().as_str()));

    let bad = lagflow(&["train", "--omega", "4", "--output-dir", s(&tmp.path().join("x"))], None);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("frequency"));
}

#[test]
fn sweep_worker_count_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = lagflow_cli::RunConfig::default();
    base.train.architecture = lagflow::Architecture::new(2, 8, 1).unwrap();
    base.train.ot_batch_size = 8;
    base.train.train_batch_size = 16;
    base.train.steps = 3;
    base.eval.n_eval = 32;
    base.eval.n_npe = 16;
    let spec = lagflow_cli::SweepSpec {
        axis: lagflow_cli::SweepAxis::Omega,
        values: vec![0.0, 1.0],
        base,
        seeds: vec![0, 1],
        methods: vec![],
    };
    let path = tmp.path().join("sweep.json");
    lagflow_cli::config::save_json(&path, &spec).unwrap();

    let out_dir = tmp.path().join("out");
    let stdout = ok(&lagflow(&["sweep", "--spec", s(&path), "--output-dir", s(&out_dir)], Some("2")));
    assert_eq!(stdout.lines().count(), 2);
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 5);

    let bad = lagflow(&["sweep", "--spec", s(&path), "--output-dir", s(&out_dir)], Some("0"));
    assert!(!bad.status.success());
    let bad = lagflow(&["sweep", "--spec", s(&path), "--output-dir", s(&out_dir)], Some("many"));
    assert!(!bad.status.success());
}
