//! End-to-end runs of the subcommand layer.

use std::fs;
use std::path::Path;

use wzlab::cli::{self, exit_code, Command, RunOptions, FAILED_MARKER, MANIFEST, RUNNING_MARKER};
use wzlab::config::ExperimentConfig;
use wzlab::Error;

const SMALL: &str = r#"
[experiment]
name = "small"
seed = 7
x0 = [1.0]
d_list = [4, 5, 6]
n_list = [4.0, 64.0]
samples = 64

[field]
kind = "geometric"
a = 0.1
c = 0.5

[davie]
m = 0.2
k2 = 0.5
probe_radius = 10.0
probe_samples = 100
bound_samples = 5
bound_level = 6
start_horizon = 1.0

[verify]
probe_radius = 10.0
samples = 100
"#;

fn run_in(command: Command, text: &str, dir: &Path, workers: Option<usize>) -> wzlab::Result<cli::RunSummary> {
    let cfg = ExperimentConfig::from_toml_str(text)?;
    cli::run(
        command,
        cfg,
        &RunOptions {
            out: Some(dir.to_path_buf()),
            workers,
            ..RunOptions::default()
        },
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn every_subcommand_succeeds_and_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    for command in Command::ALL {
        let dir = tmp.path().join(command.name());
        let summary = run_in(command, SMALL, &dir, None).unwrap();
        assert!(summary.passed, "{command}: {:?}", summary.checks);
        assert!(dir.join(MANIFEST).exists());
        assert!(!dir.join(RUNNING_MARKER).exists() && !dir.join(FAILED_MARKER).exists());
        let replayed = ExperimentConfig::load(&dir.join("config.toml")).unwrap();
        assert_eq!(replayed, ExperimentConfig::from_toml_str(SMALL).unwrap());
        for a in &summary.artifacts {
            assert!(dir.join(&a.file).exists(), "{}", a.file);
        }
    }
}

#[test]
fn replay_is_byte_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for command in [Command::Converge, Command::Diagram, Command::Paths, Command::Solve] {
        let a = tmp.path().join(format!("{command}-a"));
        let b = tmp.path().join(format!("{command}-b"));
        let c = tmp.path().join(format!("{command}-c"));
        run_in(command, SMALL, &a, Some(1)).unwrap();
        run_in(command, SMALL, &b, Some(1)).unwrap();
        run_in(command, SMALL, &c, Some(3)).unwrap();
        let first = csv_files(&a);
        assert!(!first.is_empty());
        assert_eq!(first, csv_files(&b), "{command}: replay");
        assert_eq!(first, csv_files(&c), "{command}: worker count");
    }
}

#[test]
fn seed_override_changes_the_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let a = cli::run(Command::Paths, cfg.clone(), &RunOptions { out: Some(tmp.path().join("a")), ..Default::default() }).unwrap();
    let b = cli::run(
        Command::Paths,
        cfg,
        &RunOptions {
            out: Some(tmp.path().join("b")),
            seed: Some(8),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(b.seed, 8);
    assert_ne!(csv_files(&a.dir), csv_files(&b.dir));
}

#[test]
fn additive_davie_residual_vanishes() {
    let text = include_str!("../configs/additive.toml");
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_in(Command::Davie, text, tmp.path(), None).unwrap();
    assert!(summary.passed);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("davie.json")).unwrap()).unwrap();
    for l in report["l_estimates"].as_array().unwrap() {
        assert!(l["l"]["value"].as_f64().unwrap() <= 1e-8, "{l}");
    }
}

#[test]
fn zero_noise_davie_residual_is_quadrature_error_only() {
    let text = SMALL
        .replace("kind = \"geometric\"\na = 0.1\nc = 0.5", "kind = \"affine\"\ndrift = [[0.1]]\ndiffusion = [[0.0]]")
        .replace("d_list = [4, 5, 6]", "d_list = [8, 9, 10]");
    // The trapezoid rule for ∫b leaves a residual of order a³δ³ per interval, so
    // L scales like δ^{1.8}; with a = 0.1 it is about 5e-8 at d = 6 and 4e-9 at d = 8.
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_in(Command::Davie, &text, tmp.path(), None).unwrap();
    assert!(summary.passed, "{:?}", summary.checks);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("davie.json")).unwrap()).unwrap();
    for l in report["l_estimates"].as_array().unwrap() {
        assert!(l["l"]["value"].as_f64().unwrap() <= 1e-8, "{l}");
    }
}

#[test]
fn converge_writes_a_rate_table() {
    let tmp = tempfile::tempdir().unwrap();
    run_in(Command::Converge, SMALL, tmp.path(), None).unwrap();
    let text = fs::read_to_string(tmp.path().join("rate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,delta,error,stderr"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, d) in rows.iter().zip([4.0, 5.0, 6.0]) {
        assert_eq!(row[0], d);
        assert_eq!(row[1], 2f64.powf(-d));
        assert!(row[2] > 0.0 && row[3] >= 0.0);
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("converge.json")).unwrap()).unwrap();
    assert!(report["fit"]["slope"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("seed = 7", "seed = 7\nalpha = 0.25");
    let r = run_in(Command::Verify, &bad, tmp.path(), None);
    assert!(matches!(r, Err(Error::Config { ref field, .. }) if field == "experiment.alpha"));
    assert_eq!(exit_code(&r), 2);

    let quadratic = include_str!("../configs/quadratic.toml");
    let dir = tmp.path().join("verify");
    let r = run_in(Command::Verify, quadratic, &dir, None);
    assert!(!r.as_ref().unwrap().passed);
    assert_eq!(exit_code(&r), 4);

    let dir = tmp.path().join("solve");
    let r = run_in(Command::Converge, quadratic, &dir, None);
    assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    assert_eq!(exit_code(&r), 3);
    assert!(dir.join(FAILED_MARKER).exists());
    assert!(!dir.join(RUNNING_MARKER).exists() && !dir.join(MANIFEST).exists());
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        count += 1;
    }
    assert!(count >= 5);
}
