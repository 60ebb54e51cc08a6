use std::path::Path;
use std::process::Command;

fn hrlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hrlab"))
        .args(args)
        .output()
        .unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn prove_means_flags_the_broken_axiom() {
    let out = hrlab(&["prove-means", "--cases", "500"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("internality") && text.contains("generalization"));
    // Monotonicity fails once increments cross zero, so the command fails.
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sim_two_state_writes_the_output_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        "[two_state]\nalpha_grid = [0.01]\nbeta_grid = [0.01, 0.1]\nlog_scale_grid = [0.01]\n\
         episodes = 1\nsteps_per_episode = 100\nseeds = [0, 1]\n",
    );
    let out_dir = dir.path().join("out");
    let out = hrlab(&[
        "sim-two-state",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "results.csv",
        "results.jsonl",
        "success_curve.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    // SMART is stored once per β-independent trial.
    let runs = std::fs::read_dir(out_dir.join("runs")).unwrap().count();
    assert_eq!(runs, 2 + 2 * 2 + 2 * 2);
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("config_sha256") && manifest.contains("\"runs\": 12"));
}

#[test]
fn backtest_runs_on_generated_bars() {
    let dir = tempfile::tempdir().unwrap();
    let bars = dir.path().join("bars.csv");
    let out = hrlab(&[
        "synth-bars",
        "--rows",
        "3000",
        "--seed",
        "2",
        "--out",
        bars.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cfg = dir.path().join("m.toml");
    write(
        &cfg,
        "[market]\nwindow_sizes = [3]\nbetas = [0.05]\nseeds = [0, 1]\nsegment_len = 1000\n",
    );
    let out_dir = dir.path().join("out");
    let out = hrlab(&[
        "backtest",
        "--data",
        bars.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("3 segments, 0 gaps repaired"));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.contains("harmonic,smart")));
}

#[test]
fn bad_inputs_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, "[two_state]\nepisodes = 0\n");
    let out = hrlab(&["sim-two-state", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    write(&cfg, "[market]\n");
    let out = hrlab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data"));
}
