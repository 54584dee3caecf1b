//! The `spreadsim` binary and the shipped configs.

use std::path::{Path, PathBuf};
use std::process::Command;

use spreading::experiments::{ExperimentConfig, Scenario};

const SCENARIOS: [&str; 6] = ["sweep-delta", "sweep-deadzone", "sweep-m", "perturbation", "hazard", "oracle-check"];

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn spreadsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_spreadsim")).args(args).output().unwrap()
}

/// A shipped config scaled down to a few seconds.
fn small(name: &str) -> String {
    let mut cfg = ExperimentConfig::load(&shipped(name)).unwrap();
    cfg.trials = 3;
    if let Some(g) = cfg.geometry.as_mut() {
        g.node_count = 60;
        g.width = g.width.min(2.0);
        g.height = g.height.clamp(0.5, 1.0);
        g.radius = g.radius.max(0.3);
    }
    if let Some(h) = cfg.hazard.as_mut() {
        h.source = [0.1, 0.1];
        h.zone_center = [1.0, 0.5];
        h.zone_size = [0.6, 0.4];
    }
    cfg.max_rounds = cfg.max_rounds.min(1500);
    cfg.to_toml().unwrap()
}

fn run_small(name: &str, dir: &Path) -> std::process::Output {
    let config = dir.join(format!("{name}.toml"));
    std::fs::write(&config, small(name)).unwrap();
    let out = dir.join(name);
    spreadsim(&[name, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in SCENARIOS {
        let cfg = ExperimentConfig::load(&shipped(name)).unwrap();
        assert_eq!(cfg.scenario.to_string(), name);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
    let delta = ExperimentConfig::load(&shipped("sweep-delta")).unwrap();
    assert_eq!(delta.sweep.unwrap().step.unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(delta.scenario, Scenario::SweepDelta);
}

#[test]
fn every_scenario_runs_and_passes_its_checks() {
    let dir = tempfile::tempdir().unwrap();
    for name in SCENARIOS {
        let out = run_small(name, dir.path());
        assert!(
            out.status.success(),
            "{name}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        let files = csv_bytes(&dir.path().join(name));
        assert!(files.iter().any(|(f, _)| f == "summary.json"), "{name}: {files:?}");
        assert!(files.iter().any(|(f, _)| f.ends_with(".csv")));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for name in ["sweep-deadzone", "perturbation", "hazard"] {
        assert!(run_small(name, a.path()).status.success());
        assert!(run_small(name, b.path()).status.success());
        assert_eq!(csv_bytes(&a.path().join(name)), csv_bytes(&b.path().join(name)), "{name}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let base = std::fs::read_to_string(shipped("sweep-delta")).unwrap();
    let cases = [
        ("unknown", format!("{base}\ncolour = \"blue\"\n")),
        ("negative-step", base.replace("step = [1.0, 2.0", "step = [-1.0, 2.0")),
        ("empty-list", base.replace("step = [1.0, 2.0, 3.0, 4.0, 5.0]", "step = []")),
        ("zero-trials", base.replace("trials = 100", "trials = 0")),
        ("bad-type", base.replace("trials = 100", "trials = \"many\"")),
        (
            "eps-too-large",
            std::fs::read_to_string(shipped("perturbation")).unwrap().replace("eps_fraction = 0.05", "eps_fraction = 1.0"),
        ),
    ];
    for (label, text) in cases {
        let path = dir.path().join(format!("{label}.toml"));
        std::fs::write(&path, &text).unwrap();
        let scenario = if label == "eps-too-large" { "perturbation" } else { "sweep-delta" };
        let result = spreadsim(&[scenario, "--config", path.to_str().unwrap(), "--out", out]);
        assert_eq!(result.status.code(), Some(2), "{label}: {}", String::from_utf8_lossy(&result.stderr));
    }

    // The subcommand must match the config's scenario.
    let result = spreadsim(&["sweep-m", "--config", shipped("sweep-delta").to_str().unwrap(), "--out", out]);
    assert_eq!(result.status.code(), Some(2));
    let result = spreadsim(&["hazard", "--config", "/nonexistent.toml", "--out", out]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn parse_errors_name_the_line() {
    let text = "scenario = \"sweep-delta\"\nmax_rounds = 10\ntrials = -3\n";
    let err = ExperimentConfig::from_toml(text).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}
