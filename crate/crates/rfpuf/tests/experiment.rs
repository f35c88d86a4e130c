mod common;

use rfpuf::experiment::{run_experiment, SUMMARY_FILE, TIMING_FILE};
use rfpuf::io;
use rfpuf::model::{ModelFile, MODEL_FILE};
use rfpuf::sweep::{run_sweep, sweep_csv, SweepSpec, SweepVariable};
use rfpuf::ExperimentConfig;

#[test]
fn default_config_file_matches_built_in_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    assert_eq!(
        ExperimentConfig::load(std::path::Path::new(path)).unwrap(),
        ExperimentConfig::default()
    );
}

#[test]
fn config_round_trips_and_rejects_nonsense() {
    let cfg = common::tiny(3);
    assert_eq!(
        ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap(),
        cfg
    );
    for bad in [
        "population = { n_tx = 1 }",
        "training = { frames_per_device = 1 }",
        "evaluation = { frames_per_device = 0 }",
        "unknown_key = 3",
        "[frame]\nfft_size = 1000",
        "[frame.rrc]\nrolloff = 2.0",
        "[channel]\nebn0_sigma_db = -1.0",
        "[frame]\nsymbols_per_frame = 100",
    ] {
        assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
    }
}

#[test]
fn reruns_hash_identically_and_write_everything() {
    let cfg = common::tiny(3);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.summary_hash(&cfg).unwrap(), b.summary_hash(&cfg).unwrap());
    let mut moved = cfg.clone();
    moved.output_dir = "elsewhere".into();
    assert_eq!(
        a.summary_hash(&cfg).unwrap(),
        a.summary_hash(&moved).unwrap()
    );

    let dir = tempfile::tempdir().unwrap();
    let summary = a.write(&cfg, dir.path()).unwrap();
    assert!(summary.contains("master_seed = 1"));
    for name in [
        io::FEATURES_FILE_TRAIN,
        io::FEATURES_FILE_EVAL,
        io::FEATURES_FILE_CHALLENGE,
        io::POPULATION_FILE,
        io::MANIFEST_FILE,
        io::NORMALIZATION_FILE,
        io::LOSS_FILE,
        io::CONFUSION_FILE,
        io::INTRA_FILE,
        io::INTER_FILE,
        MODEL_FILE,
        SUMMARY_FILE,
        TIMING_FILE,
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let model = ModelFile::load(&dir.path().join(MODEL_FILE)).unwrap();
    assert_eq!(model.model, a.training.model.model);
    assert_eq!(
        io::read_confusion(&dir.path().join(io::CONFUSION_FILE)).unwrap(),
        a.eval.confusion
    );
    assert_eq!(
        io::read_intra(&dir.path().join(io::INTRA_FILE)).unwrap(),
        a.puf.report.intra.per_device
    );
    assert_eq!(
        io::read_inter(&dir.path().join(io::INTER_FILE)).unwrap(),
        a.puf.report.inter.pairs
    );
}

#[test]
fn identical_clones_sit_at_chance() {
    let mut cfg = common::tiny(2);
    cfg.population.variation = cfg.population.variation.zero_variance();
    cfg.evaluation.frames_per_device = 20;
    let r = run_experiment(&cfg).unwrap();
    assert!(
        (r.eval.p_false - 0.5).abs() <= 0.25,
        "p_false {}",
        r.eval.p_false
    );
}

#[test]
fn singleton_sweep_equals_a_plain_run() {
    let base = common::tiny(3);
    for (variable, value) in [
        (SweepVariable::HiddenWidth, 7.0),
        (SweepVariable::NTx, 3.0),
        (SweepVariable::Ebn0SigmaDb, 2.0),
    ] {
        let spec = SweepSpec {
            variable,
            values: vec![value],
            base: base.clone(),
        };
        let points = run_sweep(&spec).unwrap();
        let direct = run_experiment(&spec.point(value).unwrap()).unwrap();
        let swept = points[0].result.as_ref().unwrap();
        assert_eq!(swept.metrics(), direct.metrics());
        assert_eq!(swept.training.model, direct.training.model);
    }
}

#[test]
fn sweep_records_failed_points_and_continues() {
    let spec = SweepSpec {
        variable: SweepVariable::NTx,
        values: vec![1.0, 2.0],
        base: common::tiny(2),
    };
    let points = run_sweep(&spec).unwrap();
    assert!(points[0].result.is_err());
    assert!(points[1].result.is_ok());
    let csv = String::from_utf8(sweep_csv(spec.variable, &points)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "variable,value,p_false,d_intra_worst_ppm,d_inter_worst_ppm,train_time_s,status"
    );
    assert!(lines[1].starts_with("n_tx,1,,,,,") && lines[1].contains("error"));
    assert!(lines[2].starts_with("n_tx,2,") && lines[2].ends_with(",ok"));
}

#[test]
fn sweep_spec_validation() {
    let base = common::tiny(2);
    assert!(SweepSpec {
        variable: SweepVariable::NTx,
        values: vec![],
        base: base.clone()
    }
    .validate()
    .is_err());
    assert!(SweepSpec {
        variable: SweepVariable::HiddenWidth,
        values: vec![2.5],
        base: base.clone()
    }
    .validate()
    .is_err());
    assert!(SweepSpec {
        variable: SweepVariable::Ebn0SigmaDb,
        values: vec![2.5],
        base
    }
    .validate()
    .is_ok());
    assert!("depth".parse::<SweepVariable>().is_err());
}
