use std::path::Path;
use std::process::Command as Process;

use serde_json::Value;
use wavesense::features::WaveletCoeffMatrix;
use wavesense::imaging::{BoundaryImage, ImageMethod};
use wavesense::nalgebra::DMatrix;
use wavesense::wavelet::WaveletGrid;
use wavesense::Vec2;
use wavesense_cli::commands::{run, Command, Context, MSR_CLEAN, MSR_NOISY, X_HAT};
use wavesense_cli::config::{PgmEncoding, ShapeType};
use wavesense_cli::formats::{
    matrix_csv, parse_pgm, pgm, read_matrix_csv, read_wavelet_csv, wavelet_csv, write_atomic,
};
use wavesense_cli::{CliError, Config};

fn quick(out: &Path) -> Config {
    let mut cfg = Config::from_json(include_str!("../configs/quick.json")).unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

fn manifest(dir: &Path, cmd: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{cmd}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn matrix_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 - 1.3) * (j as f64 + 0.1).powi(3) / 7.0);
    let path = dir.path().join("m.csv");
    write_atomic(&path, &matrix_csv(&m).unwrap()).unwrap();
    assert_eq!(read_matrix_csv(&path).unwrap(), m);
}

#[test]
fn wavelet_csv_roundtrip_and_lattice_check() {
    let dir = tempfile::tempdir().unwrap();
    let grid = WaveletGrid::new(-2, wavesense::wavelet::Rect::square(1.0), 1, 0.5).unwrap();
    let x = WaveletCoeffMatrix::from_triplets(grid.clone(), vec![(0, 0, 1.5), (3, 7, -0.25), (7, 3, 1e-17)]).unwrap();
    let path = dir.path().join("x.csv");
    write_atomic(&path, &wavelet_csv(&x).unwrap()).unwrap();
    assert_eq!(read_wavelet_csv(&path, &grid).unwrap(), x);
    let other = WaveletGrid::new(-3, wavesense::wavelet::Rect::square(1.0), 1, 0.5).unwrap();
    assert!(matches!(read_wavelet_csv(&path, &other), Err(CliError::Format(_))));
}

#[test]
fn pgm_roundtrip_both_encodings() {
    let img = BoundaryImage {
        dims: [3, 2],
        values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 8.0],
        centers: vec![Vec2::new(0.0, 0.0); 6],
        pixel: 1.0,
        scale: None,
        method: ImageMethod::Diagonal,
    };
    for enc in [PgmEncoding::Ascii, PgmEncoding::Binary] {
        let (w, h, levels) = parse_pgm(&pgm(&img, enc)).unwrap();
        assert_eq!((w, h), (3, 2));
        // Top row is the largest second index.
        assert_eq!(levels, vec![8192, 24576, 65535, 0, 16384, 32768]);
    }
}

#[test]
fn simulate_records_noise_level_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.noise.sigma0 = 0.5;
    let ctx = Context::new(cfg.clone());
    let rec = run(Command::Simulate, &ctx).unwrap();
    let v = read_matrix_csv(&dir.path().join(MSR_CLEAN)).unwrap();
    let expect = 0.5 * v.norm() / (v.len() as f64).sqrt();
    let sigma = rec.metrics["sigma"].as_f64().unwrap();
    assert!((sigma - expect).abs() <= 1e-12 * expect.max(1.0));
    let first = std::fs::read(dir.path().join(MSR_NOISY)).unwrap();
    run(Command::Simulate, &ctx).unwrap();
    assert_eq!(std::fs::read(dir.path().join(MSR_NOISY)).unwrap(), first);
    cfg.noise.seed += 1;
    run(Command::Simulate, &Context::new(cfg)).unwrap();
    assert_ne!(std::fs::read(dir.path().join(MSR_NOISY)).unwrap(), first);
}

#[test]
fn simulate_reconstruct_image_composes() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(quick(dir.path()));
    for cmd in [Command::Simulate, Command::Reconstruct, Command::Image] {
        run(cmd, &ctx).unwrap();
    }
    let m = manifest(dir.path(), "image");
    assert_eq!(m["inputs"][0]["name"], X_HAT);
    for name in ["image_max.pgm", "image_diag.pgm", "image_direct.pgm", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let inv: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let runs: Vec<&str> = inv["runs"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
    assert_eq!(runs, ["image", "reconstruct", "simulate"]);
}

#[test]
fn reconstruct_trace_is_monotone_and_mu_scale_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    run(Command::Simulate, &Context::new(cfg.clone())).unwrap();
    let base = run(Command::Reconstruct, &Context::new(cfg.clone())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let obj: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(obj.windows(2).all(|w| w[1] <= w[0]));
    cfg.solver.mu_scale = 2.0;
    let scaled = run(Command::Reconstruct, &Context::new(cfg)).unwrap();
    let (a, b) = (base.metrics["mu"].as_f64().unwrap(), scaled.metrics["mu"].as_f64().unwrap());
    assert!((b - 2.0 * a).abs() < 1e-12 * b);
    assert_eq!(manifest(dir.path(), "reconstruct")["config"]["solver"]["mu_scale"], 2.0);
}

#[test]
fn reconstruct_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(dir.path());
    let wrong = dir.path().join("wrong.csv");
    write_atomic(&wrong, &matrix_csv(&DMatrix::from_element(3, 5, 1.0)).unwrap()).unwrap();
    let ctx = Context { input: Some(wrong), ..Context::new(cfg.clone()) };
    assert!(matches!(run(Command::Reconstruct, &ctx), Err(CliError::Core(wavesense::Error::DimensionMismatch(_)))));
    let bad = dir.path().join("nan.csv");
    let mut m = DMatrix::from_element(64, 64, 1.0);
    m[(3, 4)] = f64::NAN;
    write_atomic(&bad, &matrix_csv(&m).unwrap()).unwrap();
    let ctx = Context { input: Some(bad), ..Context::new(cfg) };
    assert!(run(Command::Reconstruct, &ctx).is_err());
}

#[test]
fn features_on_disk_report_the_analytic_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.shape.kind = ShapeType::Disk;
    cfg.shape.radius = 0.5;
    let rec = run(Command::Features, &Context::new(cfg)).unwrap();
    let gpt = read_matrix_csv(&dir.path().join("gpt.csv")).unwrap();
    let expect = 2.0 * std::f64::consts::PI / 7.0 * 0.25;
    assert!((gpt[(0, 0)] - expect).abs() < 1e-3 * expect);
    assert!((gpt[(1, 1)] - expect).abs() < 1e-3 * expect);
    assert!(rec.metrics.contains_key("mask_density"));
    let nterm = std::fs::read_to_string(dir.path().join("nterm.csv")).unwrap();
    assert!(nterm.lines().any(|l| l.starts_with("0.005,")));
}

#[test]
fn diagnose_writes_sorted_profiles_for_both_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(Command::Diagnose, &Context::new(quick(dir.path()))).unwrap();
    for name in ["svd_near.csv", "svd_far.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let s: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(!s.is_empty());
        assert!(s.windows(2).all(|w| w[1] <= w[0]), "{name}");
    }
    assert!(rec.metrics.contains_key("condition_gx_far"));
}

#[test]
fn binary_runs_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, quick(Path::new("ignored")).to_json()).unwrap();
    let out = dir.path().join("out");
    let status = Process::new(env!("CARGO_BIN_EXE_wavesense"))
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "42", "--variant", "literal", "--mu-scale", "3"])
        .status()
        .unwrap();
    assert!(status.success());
    let m = manifest(&out, "simulate");
    assert_eq!(m["config"]["noise"]["seed"], 42);
    assert_eq!(m["config"]["imaging"]["variant"], "literal");
    assert_eq!(m["config"]["solver"]["mu_scale"], 3.0);
    assert!(m.to_string().find("elapsed").is_none());

    std::fs::write(&cfg_path, "{\n  \"mesh_nodes\": 256,\n  \"bogus\": 1\n}").unwrap();
    let res =
        Process::new(env!("CARGO_BIN_EXE_wavesense")).args(["simulate", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}
