mod common;

use std::collections::HashSet;

use rfpuf::dataset::{frame_seeds, generate_dataset, Split};
use rfpuf::experiment::dataset_artifacts;
use rfpuf::io::{self, read_features_csv, read_manifest};

#[test]
fn row_counts_follow_the_config() {
    let cfg = common::tiny(2);
    let d = generate_dataset(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, bytes) in dataset_artifacts(&cfg, &d).unwrap() {
        io::write_file(dir.path(), name, &bytes).unwrap();
    }
    let train = read_features_csv(&dir.path().join(io::FEATURES_FILE_TRAIN)).unwrap();
    let eval = read_features_csv(&dir.path().join(io::FEATURES_FILE_EVAL)).unwrap();
    assert_eq!(train.len(), 4);
    assert_eq!(eval.len(), 2);
    // Round trip is exact.
    for (row, rec) in train.iter().zip(&d.train) {
        assert_eq!(row.features, rec.features);
        assert_eq!(row.device_id, rec.device_id);
        assert_eq!(row.prbs_seed, rec.prbs_seed);
        assert_eq!(row.ebn0_db.to_bits(), rec.channel.ebn0_db.to_bits());
    }
}

#[test]
fn same_seed_same_bytes_and_other_seed_other_bytes() {
    let cfg = common::tiny(3);
    let a = dataset_artifacts(&cfg, &generate_dataset(&cfg).unwrap()).unwrap();
    let b = dataset_artifacts(&cfg, &generate_dataset(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.master_seed = 2;
    let c = dataset_artifacts(&other, &generate_dataset(&other).unwrap()).unwrap();
    let features = |files: &[(&str, Vec<u8>)]| {
        files
            .iter()
            .find(|f| f.0 == io::FEATURES_FILE_TRAIN)
            .unwrap()
            .1
            .clone()
    };
    assert_ne!(features(&a), features(&c));
}

#[test]
fn manifest_shows_disjoint_train_and_eval_seeds() {
    let mut cfg = common::tiny(4);
    cfg.training.frames_per_device = 5;
    cfg.evaluation.frames_per_device = 3;
    let d = generate_dataset(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let all = d.train.iter().chain(&d.eval).chain(&d.challenge);
    io::write_file(dir.path(), io::MANIFEST_FILE, &io::manifest_csv(all)).unwrap();
    let manifest = read_manifest(&dir.path().join(io::MANIFEST_FILE)).unwrap();
    let seeds = |split: Split, pick: fn(&io::ManifestRow) -> u64| -> HashSet<u64> {
        manifest
            .iter()
            .filter(|r| r.split == split)
            .map(pick)
            .collect()
    };
    for pick in [
        |r: &io::ManifestRow| r.prbs_seed,
        |r: &io::ManifestRow| r.channel_seed,
        |r: &io::ManifestRow| r.noise_seed,
    ] {
        let train = seeds(Split::Train, pick);
        let eval = seeds(Split::Eval, pick);
        assert_eq!(train.len(), 20);
        assert_eq!(eval.len(), 12);
        assert!(train.is_disjoint(&eval));
    }
}

#[test]
fn challenge_replays_share_the_bit_stream() {
    let d = generate_dataset(&common::tiny(3)).unwrap();
    let prbs: HashSet<u64> = d.challenge.iter().map(|r| r.prbs_seed).collect();
    assert_eq!(prbs.len(), 1);
    let channels: HashSet<u64> = d.challenge.iter().map(|r| r.channel_seed).collect();
    assert_eq!(channels.len(), d.challenge.len());
}

#[test]
fn retries_derive_fresh_seeds() {
    let first = frame_seeds(1, Split::Train, 0, 0, 0);
    let retry = frame_seeds(1, Split::Train, 0, 0, 1);
    assert_ne!(first.0, retry.0);
    assert_ne!(first.1, retry.1);
    assert_ne!(first.2, retry.2);
    assert_ne!(first, frame_seeds(1, Split::Eval, 0, 0, 0));
}

#[test]
fn normalization_is_fitted_on_training_rows_only() {
    let d = generate_dataset(&common::tiny(2)).unwrap();
    let train: Vec<_> = d.train.iter().map(|r| r.features).collect();
    assert_eq!(
        d.normalization,
        rfpuf_core::features::fit_normalization(&train).unwrap()
    );
}
