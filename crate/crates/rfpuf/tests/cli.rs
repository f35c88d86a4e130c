mod common;

use std::path::Path;
use std::process::{Command, Output};

fn rfpuf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfpuf"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, cfg: &rfpuf::ExperimentConfig) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn staged_commands_reproduce_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &common::tiny(3));
    let staged = tmp.path().join("staged");
    let full = tmp.path().join("full");
    for cmd in ["gen", "train", "eval"] {
        let out = rfpuf(&["--config", &cfg, "--out", s(&staged), "--quiet", cmd]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(
        rfpuf(&["--config", &cfg, "--out", s(&full), "--quiet", "run"])
            .status
            .success()
    );
    for name in [
        "train_features.csv",
        "eval_features.csv",
        "model.json",
        "training_loss.csv",
        "confusion.csv",
        "puf_intra.csv",
        "puf_inter.csv",
    ] {
        assert_eq!(
            std::fs::read(staged.join(name)).unwrap(),
            std::fs::read(full.join(name)).unwrap(),
            "{name}"
        );
    }
    let report = rfpuf(&["--out", s(&full), "report"]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    let summary = std::fs::read_to_string(full.join("summary.txt")).unwrap();
    let p_false = text.lines().find(|l| l.starts_with("p_false")).unwrap();
    assert!(summary.contains(p_false), "{p_false}");
}

#[test]
fn train_uses_the_echoed_config_without_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = common::tiny(2);
    c.master_seed = 42;
    let cfg = write_config(tmp.path(), &c);
    let out = tmp.path().join("o");
    assert!(
        rfpuf(&["--config", &cfg, "--out", s(&out), "--quiet", "gen"])
            .status
            .success()
    );
    assert!(rfpuf(&["--out", s(&out), "--quiet", "train"])
        .status
        .success());
    let model = rfpuf::model::ModelFile::load(&out.join("model.json")).unwrap();
    let (init, _) = rfpuf::experiment::training_seeds(&c);
    assert_eq!(model.model.init_seed, init);
}

#[test]
fn seed_and_ablation_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &common::tiny(2));
    let out = tmp.path().join("o");
    assert!(rfpuf(&[
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--seed",
        "9",
        "--rrc-ablation",
        "--quiet",
        "gen"
    ])
    .status
    .success());
    let echoed = rfpuf::ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echoed.master_seed, 9);
    assert!(echoed.rrc_ablation);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "population = { n_tx = 1 }").unwrap();
    assert_eq!(rfpuf(&["--config", s(&bad), "run"]).status.code(), Some(1));
    assert_eq!(
        rfpuf(&["--config", s(&tmp.path().join("missing.toml")), "run"])
            .status
            .code(),
        Some(1)
    );

    let empty = tmp.path().join("empty");
    assert_eq!(
        rfpuf(&["--out", s(&empty), "--quiet", "train"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rfpuf(&["--out", s(&empty), "--quiet", "report"])
            .status
            .code(),
        Some(2)
    );

    let mut clones = common::tiny(2);
    clones.population.variation = clones.population.variation.zero_variance();
    clones.evaluation.frames_per_device = 10;
    clones.check.max_p_false = 0.0;
    let cfg = write_config(tmp.path(), &clones);
    let out = tmp.path().join("clones");
    assert_eq!(
        rfpuf(&["--config", &cfg, "--out", s(&out), "--quiet", "run"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        rfpuf(&[
            "--config",
            &cfg,
            "--out",
            s(&out),
            "--quiet",
            "--check",
            "run"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        rfpuf(&[
            "--config",
            &cfg,
            "--out",
            s(&out),
            "--quiet",
            "--check",
            "report"
        ])
        .status
        .code(),
        Some(3)
    );
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &common::tiny(2));
    let out = tmp.path().join("sweep");
    let run = rfpuf(&[
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--quiet",
        "sweep",
        "--variable",
        "hidden_width",
        "--values",
        "4,8",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("hidden_width_4").join("summary.txt").exists());
    let bad = rfpuf(&[
        "--config",
        &cfg,
        "--out",
        s(&out),
        "sweep",
        "--variable",
        "depth",
        "--values",
        "1",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
