use std::path::Path;

use lagflow::odesolve::Method;
use lagflow::{Architecture, DatasetName, DatasetSpec, LagrangianSpec, SolveSpec, VelocityModel};
use lagflow_cli::checkpoint::MAGIC;
use lagflow_cli::config::{load_json, save_json};
use lagflow_cli::tables::{self, mean_std, summarize, SweepRow};
use lagflow_cli::{Checkpoint, CheckpointHeader, CliError, RunConfig, SweepAxis, SweepSpec};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = DatasetSpec> {
    (prop::sample::select(DatasetName::ALL.to_vec()), any::<u64>())
        .prop_map(|(name, seed)| DatasetSpec::new(name, seed))
}

fn lagrangian() -> impl Strategy<Value = LagrangianSpec> {
    prop_oneof![
        Just(LagrangianSpec::FreeParticle),
        (0.001f64..3.1).prop_map(|omega| LagrangianSpec::Harmonic { omega }),
        (0.01f64..3.0, 0.01f64..3.0, -3.0f64..3.0).prop_map(|(a, b, th)| {
            let (c, s) = (th.cos(), th.sin());
            let frame = vec![c, -s, s, c];
            LagrangianSpec::Anisotropic {
                potential: lagflow::SpectralPotential::new(frame, vec![a, b]).unwrap(),
            }
        }),
    ]
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        lagrangian(),
        dataset(),
        dataset(),
        (1usize..128, 1usize..6, 1usize..64, 1usize..4),
        (0usize..100_000, any::<u64>(), 1e-6f64..1e-1, prop::option::of(0.0f64..1.0)),
        (1usize..5000, 0usize..5000, 0.01f64..3.0, any::<bool>()),
        prop::sample::select(vec![Method::Euler, Method::Midpoint, Method::Rk4, Method::Adaptive]),
        "[a-z0-9_/]{1,20}",
    )
        .prop_map(|(l, src, tgt, (width, depth, ot, chunks), (steps, seed, lr, ema), (n_eval, n_npe, w_ref, fin), method, dir)| {
            let mut cfg = RunConfig::default();
            cfg.train.lagrangian = l;
            cfg.train.source = src;
            cfg.train.target = tgt;
            cfg.train.architecture = Architecture::new(2, width, depth).unwrap();
            cfg.train.ot_batch_size = ot;
            cfg.train.train_batch_size = ot * chunks;
            cfg.train.steps = steps;
            cfg.train.seed = seed;
            cfg.train.optimizer.lr = lr;
            cfg.train.ema_decay = ema;
            cfg.eval.n_eval = n_eval;
            cfg.eval.n_npe = n_npe;
            cfg.eval.omega_ref = w_ref;
            cfg.eval.solver = match method {
                Method::Adaptive => SolveSpec::adaptive(lr, lr * 0.5),
                m => SolveSpec::fixed(m, 4 * width),
            };
            cfg.eval_seed = seed ^ 0xabcdef;
            cfg.final_eval = fin;
            cfg.output_dir = dir.into();
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn run_config_round_trips(cfg in run_config()) {
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        // and once more through the compact form
        let again: RunConfig = serde_json::from_str(&serde_json::to_string(&back).unwrap()).unwrap();
        prop_assert_eq!(again, cfg);
    }

    #[test]
    fn sweep_spec_round_trips(
        base in run_config(),
        axis in prop::sample::select(vec![SweepAxis::Omega, SweepAxis::Nfe, SweepAxis::OtBatchSize]),
        values in prop::collection::vec(1u32..200, 1..6),
        seeds in prop::collection::vec(any::<u64>(), 1..6),
    ) {
        let spec = SweepSpec {
            axis,
            values: values.into_iter().map(f64::from).collect(),
            base,
            seeds,
            methods: vec![Method::Euler, Method::Rk4],
        };
        let back: SweepSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn checkpoint_round_trips(width in 1usize..40, depth in 1usize..4, seed in any::<u64>(), l in lagrangian()) {
        let arch = Architecture::new(2, width, depth).unwrap();
        let model = VelocityModel::new(arch, seed);
        let ckpt = Checkpoint {
            header: CheckpointHeader {
                architecture: arch,
                lagrangian: l,
                seed,
                steps: 17,
                source: DatasetSpec::new(DatasetName::Gaussian, seed),
                target: DatasetSpec::new(DatasetName::Moons, seed),
                ema_decay: None,
                param_count: model.params().len(),
            },
            model,
        };
        let bytes = ckpt.to_bytes();
        prop_assert_eq!(&bytes[..8], MAGIC);
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back, ckpt);
    }
}

#[test]
fn defaults_are_filled_in() {
    let text = r#"{
        "train": {
            "lagrangian": {"kind": "free_particle"},
            "source": {"name": "gaussian", "seed": 3},
            "target": {"name": "eightgaussians", "seed": 3},
            "ot_batch_size": 128,
            "train_batch_size": 256,
            "steps": 100,
            "seed": 3
        }
    }"#;
    let cfg: RunConfig = serde_json::from_str(text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.eval.n_eval, 2048);
    assert_eq!(cfg.eval.n_npe, 512);
    assert_eq!(cfg.eval.omega_ref, 1.0);
    assert_eq!(cfg.eval.solver.method, Method::Adaptive);
    assert!(cfg.final_eval);
    assert_eq!(cfg.train.architecture, Architecture::default());
    assert_eq!(cfg.train.source.dimension, 2);
}

#[test]
fn json_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let cfg = RunConfig::default();
    save_json(&path, &cfg).unwrap();
    assert_eq!(load_json::<RunConfig>(&path).unwrap(), cfg);
    assert!(matches!(
        load_json::<RunConfig>(&dir.path().join("missing.json")),
        Err(CliError::Io { .. })
    ));
    std::fs::write(&path, "{ not json").unwrap();
    assert!(matches!(load_json::<RunConfig>(&path), Err(CliError::Json { .. })));
}

#[test]
fn sweep_validation() {
    let ok = SweepSpec {
        axis: SweepAxis::Omega,
        values: vec![0.0, 1.0],
        base: RunConfig::default(),
        seeds: vec![0],
        methods: vec![Method::Rk4],
    };
    ok.validate().unwrap();
    for bad in [
        SweepSpec { values: vec![], ..ok.clone() },
        SweepSpec { seeds: vec![], ..ok.clone() },
        SweepSpec { values: vec![4.0], ..ok.clone() },
        SweepSpec { axis: SweepAxis::Nfe, values: vec![2.5], ..ok.clone() },
        SweepSpec { axis: SweepAxis::OtBatchSize, values: vec![0.0], ..ok.clone() },
        SweepSpec { axis: SweepAxis::Nfe, methods: vec![], ..ok.clone() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let arch = Architecture::new(2, 4, 1).unwrap();
    let model = VelocityModel::new(arch, 0);
    let ckpt = Checkpoint {
        header: CheckpointHeader {
            architecture: arch,
            lagrangian: LagrangianSpec::FreeParticle,
            seed: 0,
            steps: 0,
            source: DatasetSpec::new(DatasetName::Gaussian, 0),
            target: DatasetSpec::new(DatasetName::Moons, 0),
            ema_decay: None,
            param_count: model.params().len(),
        },
        model,
    };
    let bytes = ckpt.to_bytes();
    let p = Path::new("x");
    let bad = |b: &[u8]| matches!(Checkpoint::from_bytes(b, p), Err(CliError::BadCheckpoint { .. }));
    assert!(bad(&bytes[..bytes.len() - 3]));
    assert!(bad(&bytes[..12]));
    assert!(bad(b"LAGFLOW2xxxxxxxxxxxxxxxx"));
    let mut long = bytes.clone();
    long[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(bad(&long));
    let mut extra = bytes.clone();
    extra.extend_from_slice(&[0; 8]);
    assert!(bad(&extra));
}

#[test]
fn points_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let pts = lagflow::synthdata::sample(&DatasetSpec::gaussian(3, 4), 50).unwrap();
    tables::write_points(&path, 3, &pts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("x0,x1,x2"));
    assert_eq!(text.lines().count(), 51);
    assert_eq!(tables::read_points(&path).unwrap(), pts);
}

#[test]
fn summary_statistics() {
    let row = |value: f64, seed: u64, method: &str, w2: f64, npe: Option<f64>| SweepRow {
        axis: "nfe".into(),
        value,
        seed,
        method: method.into(),
        w2,
        npe,
        coupling_excess: None,
        path_excess: None,
        nfe: value as usize,
    };
    let rows = vec![
        row(4.0, 0, "euler", 1.0, None),
        row(4.0, 1, "euler", 3.0, None),
        row(4.0, 0, "rk4", 0.5, Some(0.1)),
        row(8.0, 0, "euler", 2.0, Some(0.3)),
    ];
    let s = summarize(&rows);
    assert_eq!(s.len(), 3);
    assert_eq!((s[0].value, s[0].method.as_str(), s[0].runs), (4.0, "euler", 2));
    assert_eq!(s[0].w2_mean, 2.0);
    assert!((s[0].w2_std - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(s[0].npe_mean, None);
    assert_eq!((s[1].npe_mean, s[1].npe_std), (Some(0.1), Some(0.0)));
    assert_eq!(mean_std(&[5.0]), (5.0, 0.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    tables::write_rows(&path, &rows).unwrap();
    let header = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        header.lines().next(),
        Some("axis,value,seed,method,w2,npe,coupling_excess,path_excess,nfe")
    );
    assert_eq!(tables::read_rows::<SweepRow>(&path).unwrap(), rows);
}

#[test]
fn svg_output_is_well_formed() {
    use lagflow_cli::plot::{metric_svg, trajectory_svg, Series};
    let s = Series {
        name: "euler".into(),
        x: vec![4.0, 8.0, 16.0],
        mean: vec![0.5, 0.3, 0.2],
        std: vec![0.05, 0.02, 0.0],
    };
    let svg = metric_svg("W2 vs nfe", "nfe", "W2", &[s], true);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polygon").count(), 1);
    assert!(!svg.contains("NaN"));

    let a = lagflow::PointBatch::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
    let b = lagflow::PointBatch::from_rows(&[[0.5, 0.0], [1.0, 2.0]]).unwrap();
    let svg = trajectory_svg("t", &b, &[a.clone(), b.clone()], 1);
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(!svg.contains("NaN"));
    // degenerate inputs still produce finite coordinates
    let svg = trajectory_svg("t", &a.head(1), &[a.head(1)], 10);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
}
