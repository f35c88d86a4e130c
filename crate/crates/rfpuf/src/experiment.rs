//! End-to-end runs: dataset, training, evaluation, PUF metrics and the files
//! that record them.
//!
//! Every artifact except `timing.txt` is a pure function of the config, so
//! `summary.txt` ends with a hash over the artifacts that two equal runs
//! reproduce exactly.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rfpuf_core::ann::{init_mlp, train, MlpModel, TrainReport};
use rfpuf_core::features::{
    fit_normalization, FeatureVector, NormalizationParams, DEVICE_FEATURES, FEATURE_NAMES,
    N_FEATURES, SCALE_FLOOR,
};
use rfpuf_core::pufmetrics::{
    crp_count, evaluate, puf_distance_report, CrpStrength, EvalReport, PufDistanceReport,
};
use rfpuf_core::seed::{mix, Namespace};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::dataset::{generate_dataset, population_seed, Dataset, FrameRecord};
use crate::error::{HarnessError, Result, Stage};
use crate::io::{self, FeatureRow};
use crate::model::{ModelFile, MODEL_FILE};

pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const TIMING_FILE: &str = "timing.txt";

/// Bits per feature assumed when sizing the challenge-response space.
pub const CRP_BITS_PER_FEATURE: usize = 16;

/// Feature vectors with their device labels, independent of where they came
/// from (a fresh simulation or a features CSV).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rows {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<usize>,
}

impl Rows {
    pub fn from_records(records: &[FrameRecord]) -> Self {
        Rows {
            features: records.iter().map(|r| r.features).collect(),
            labels: records.iter().map(|r| r.device_id).collect(),
        }
    }

    pub fn from_feature_rows(rows: &[FeatureRow]) -> Self {
        Rows {
            features: rows.iter().map(|r| r.features).collect(),
            labels: rows.iter().map(|r| r.device_id).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One past the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    fn labeled(&self, normalization: &NormalizationParams) -> Result<rfpuf_core::ann::LabeledSet> {
        let mut set = rfpuf_core::ann::LabeledSet::new(N_FEATURES);
        for (f, l) in self.features.iter().zip(&self.labels) {
            set.push(&normalization.apply(f).stage("normalization")?.values, *l)
                .stage("dataset")?;
        }
        Ok(set)
    }
}

pub fn fit_rows(train_rows: &Rows) -> Result<NormalizationParams> {
    fit_normalization(&train_rows.features).stage("normalization")
}

/// Seeds for weight initialization and batch order. The config's own
/// `training.mlp.seed` is folded in so it still selects between runs.
pub fn training_seeds(cfg: &ExperimentConfig) -> (u64, u64) {
    let user = cfg.training.mlp.seed;
    (
        mix(cfg.master_seed, Namespace::ModelInit, 0, user),
        mix(cfg.master_seed, Namespace::Shuffle, 0, user),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub report: TrainReport,
    pub train_time_s: f64,
}

/// Trains on `train_rows`; `eval_rows`, when given, supply the per-epoch
/// accuracy curve only.
pub fn train_on(
    cfg: &ExperimentConfig,
    normalization: &NormalizationParams,
    train_rows: &Rows,
    eval_rows: Option<&Rows>,
    n_classes: usize,
) -> Result<TrainOutcome> {
    let train_set = train_rows.labeled(normalization)?;
    let eval_set = eval_rows.map(|r| r.labeled(normalization)).transpose()?;
    let (init_seed, shuffle_seed) = training_seeds(cfg);
    let mut tc = cfg.training.mlp.clone();
    tc.seed = shuffle_seed;
    let model: MlpModel =
        init_mlp(N_FEATURES, &tc.hidden_sizes, n_classes, init_seed).stage("model init")?;
    let start = Instant::now();
    let (model, mut report) = train(model, &train_set, eval_set.as_ref(), &tc).stage("training")?;
    let train_time_s = start.elapsed().as_secs_f64();
    report.wall_time_secs = Some(train_time_s);
    Ok(TrainOutcome {
        model: ModelFile::new(model, normalization.clone()),
        report,
        train_time_s,
    })
}

pub fn evaluate_on(model: &ModelFile, eval_rows: &Rows) -> Result<EvalReport> {
    if eval_rows.n_classes() > model.model.n_outputs() {
        return Err(HarnessError::Config(format!(
            "evaluation rows name device {} but the model has {} classes",
            eval_rows.n_classes() - 1,
            model.model.n_outputs()
        )));
    }
    evaluate(&model.model, &eval_rows.labeled(&model.normalization)?).stage("evaluation")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PufOutcome {
    pub report: PufDistanceReport,
    /// Population std of each device feature over the challenge responses.
    pub scales: Vec<f64>,
    /// The frequency feature alone in carrier-relative ppm: the largest spread
    /// between two replays of one device, and the closest pair of device means.
    pub cfo_intra_worst_carrier_ppm: f64,
    pub cfo_inter_worst_carrier_ppm: f64,
}

/// `responses[d][k]` from rows, keeping only the device features.
pub fn responses_by_device(rows: &Rows, n_devices: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); n_devices];
    for (f, l) in rows.features.iter().zip(&rows.labels) {
        out[*l].push(DEVICE_FEATURES.iter().map(|&i| f.values[i]).collect());
    }
    out
}

pub fn puf_on(
    cfg: &ExperimentConfig,
    challenge_rows: &Rows,
    n_devices: usize,
) -> Result<PufOutcome> {
    let responses = responses_by_device(challenge_rows, n_devices);
    let all: Vec<&Vec<f64>> = responses.iter().flatten().collect();
    if all.is_empty() {
        return Err(HarnessError::Config("no challenge responses".into()));
    }
    let n = all.len() as f64;
    let scales: Vec<f64> = (0..DEVICE_FEATURES.len())
        .map(|k| {
            let mean = all.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = all.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            var.sqrt().max(SCALE_FLOOR)
        })
        .collect();
    let report =
        puf_distance_report(&responses, &scales, cfg.evaluation.inter_mode).stage("puf metrics")?;

    let cfo = DEVICE_FEATURES
        .iter()
        .position(|&i| FEATURE_NAMES[i] == "cfo_ppm")
        .expect("cfo is a device feature");
    let mut intra = 0.0f64;
    let mut means = Vec::with_capacity(n_devices);
    for evals in &responses {
        let v: Vec<f64> = evals.iter().map(|r| r[cfo]).collect();
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                (a.min(*x), b.max(*x))
            });
        intra = intra.max(hi - lo);
        means.push(v.iter().sum::<f64>() / v.len() as f64);
    }
    let mut inter = f64::INFINITY;
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            inter = inter.min((means[a] - means[b]).abs());
        }
    }
    Ok(PufOutcome {
        report,
        scales,
        cfo_intra_worst_carrier_ppm: intra,
        cfo_inter_worst_carrier_ppm: inter,
    })
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dataset: Dataset,
    pub training: TrainOutcome,
    pub eval: EvalReport,
    pub puf: PufOutcome,
    pub crp: CrpStrength,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let dataset = generate_dataset(cfg)?;
    run_with_dataset(cfg, dataset)
}

/// Training, evaluation and PUF metrics on an existing dataset. The dataset
/// must have been generated from a config that differs from `cfg` at most in
/// its training settings.
pub fn run_with_dataset(cfg: &ExperimentConfig, dataset: Dataset) -> Result<RunResult> {
    cfg.validate()?;
    let n = dataset.n_devices();
    let train_rows = Rows::from_records(&dataset.train);
    let eval_rows = Rows::from_records(&dataset.eval);
    let training = train_on(
        cfg,
        &dataset.normalization,
        &train_rows,
        Some(&eval_rows),
        n,
    )?;
    let eval = evaluate_on(&training.model, &eval_rows)?;
    let puf = puf_on(cfg, &Rows::from_records(&dataset.challenge), n)?;
    let crp = crp_count(N_FEATURES, CRP_BITS_PER_FEATURE).stage("crp")?;
    Ok(RunResult {
        dataset,
        training,
        eval,
        puf,
        crp,
    })
}

/// The config as echoed into a run directory. The output location is blanked
/// so that equal experiments written to different places hash the same.
pub fn config_echo(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let mut c = cfg.clone();
    c.output_dir = ".".into();
    Ok(c.to_toml_string()?.into_bytes())
}

/// Files of the dataset stage.
pub fn dataset_artifacts(
    cfg: &ExperimentConfig,
    d: &Dataset,
) -> Result<Vec<(&'static str, Vec<u8>)>> {
    Ok(vec![
        (io::FEATURES_FILE_TRAIN, io::features_csv(&d.train)),
        (io::FEATURES_FILE_EVAL, io::features_csv(&d.eval)),
        (io::FEATURES_FILE_CHALLENGE, io::features_csv(&d.challenge)),
        (io::POPULATION_FILE, io::population_csv(&d.population)),
        (
            io::MANIFEST_FILE,
            io::manifest_csv(d.train.iter().chain(&d.eval).chain(&d.challenge)),
        ),
        (
            io::NORMALIZATION_FILE,
            io::normalization_csv(&d.normalization),
        ),
        (CONFIG_ECHO_FILE, config_echo(cfg)?),
    ])
}

pub fn training_artifacts(t: &TrainOutcome) -> Vec<(&'static str, Vec<u8>)> {
    vec![
        (MODEL_FILE, t.model.to_json()),
        (io::LOSS_FILE, io::loss_csv(&t.report)),
    ]
}

pub fn evaluation_artifacts(eval: &EvalReport, puf: &PufOutcome) -> Vec<(&'static str, Vec<u8>)> {
    vec![
        (io::CONFUSION_FILE, io::confusion_csv(eval)),
        (io::INTRA_FILE, io::intra_csv(&puf.report)),
        (io::INTER_FILE, io::inter_csv(&puf.report)),
    ]
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{:02x}", b);
            s
        })
}

/// Headline numbers shared by the summary and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub p_false: f64,
    pub d_intra_worst_ppm: f64,
    pub d_inter_worst_ppm: f64,
    pub identifiable: bool,
}

impl RunResult {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            p_false: self.eval.p_false,
            d_intra_worst_ppm: self.puf.report.d_intra_worst_ppm,
            d_inter_worst_ppm: self.puf.report.d_inter_worst_ppm,
            identifiable: self.puf.report.identifiable,
        }
    }

    pub fn artifacts(&self, cfg: &ExperimentConfig) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut files = dataset_artifacts(cfg, &self.dataset)?;
        files.extend(training_artifacts(&self.training));
        files.extend(evaluation_artifacts(&self.eval, &self.puf));
        Ok(files)
    }

    /// The summary text, ending in `summary_hash`.
    pub fn summary(&self, cfg: &ExperimentConfig) -> Result<String> {
        let files = self.artifacts(cfg)?;
        let (init_seed, shuffle_seed) = training_seeds(cfg);
        let m = self.metrics();
        let r = &self.puf.report;
        let mut s = String::new();
        let _ = writeln!(s, "[seeds]");
        let _ = writeln!(s, "master_seed = {}", cfg.master_seed);
        let _ = writeln!(s, "population_seed = {}", population_seed(cfg.master_seed));
        let _ = writeln!(s, "model_init_seed = {}", init_seed);
        let _ = writeln!(s, "shuffle_seed = {}", shuffle_seed);
        let _ = writeln!(s, "\n[dataset]");
        let _ = writeln!(s, "devices = {}", self.dataset.n_devices());
        let _ = writeln!(s, "train_frames = {}", self.dataset.train.len());
        let _ = writeln!(s, "eval_frames = {}", self.dataset.eval.len());
        let _ = writeln!(s, "challenge_frames = {}", self.dataset.challenge.len());
        let _ = writeln!(s, "retried_frames = {}", self.dataset.retried_frames());
        let _ = writeln!(s, "\n[identification]");
        let _ = writeln!(s, "p_false = {}", m.p_false);
        let _ = writeln!(
            s,
            "correct = {} / {}",
            self.eval.correct(),
            self.eval.total()
        );
        let _ = writeln!(
            s,
            "final_train_loss = {}",
            self.training
                .report
                .loss
                .last()
                .copied()
                .unwrap_or(f64::NAN)
        );
        let _ = writeln!(s, "\n[puf]");
        let _ = writeln!(s, "inter_mode = {:?}", cfg.evaluation.inter_mode);
        let _ = writeln!(s, "d_intra_worst_ppm = {}", m.d_intra_worst_ppm);
        let _ = writeln!(s, "d_intra_worst_device = {}", r.intra.worst_device);
        let _ = writeln!(s, "d_inter_worst_ppm = {}", m.d_inter_worst_ppm);
        let _ = writeln!(
            s,
            "d_inter_worst_pair = {} {}",
            r.inter.worst_pair.0, r.inter.worst_pair.1
        );
        let _ = writeln!(s, "identifiable = {}", m.identifiable);
        let _ = writeln!(
            s,
            "cfo_intra_worst_carrier_ppm = {}",
            self.puf.cfo_intra_worst_carrier_ppm
        );
        let _ = writeln!(
            s,
            "cfo_inter_worst_carrier_ppm = {}",
            self.puf.cfo_inter_worst_carrier_ppm
        );
        let _ = writeln!(
            s,
            "crp_count = 2^{} = {}",
            N_FEATURES * CRP_BITS_PER_FEATURE,
            self.crp.count
        );
        let _ = writeln!(s, "crp_guess_probability = {}", self.crp.guess_probability);
        let _ = writeln!(s, "\n[artifacts]");
        let mut hasher = Sha256::new();
        for (name, bytes) in &files {
            let h = sha256_hex(bytes);
            let _ = writeln!(s, "{} = {}", name, h);
            hasher.update(name.as_bytes());
            hasher.update(b"\0");
            hasher.update(h.as_bytes());
        }
        let _ = writeln!(s, "\nsummary_hash = {}", sha256_hex(&hasher.finalize()));
        Ok(s)
    }

    pub fn summary_hash(&self, cfg: &ExperimentConfig) -> Result<String> {
        let s = self.summary(cfg)?;
        Ok(s.lines()
            .last()
            .and_then(|l| l.strip_prefix("summary_hash = "))
            .unwrap_or_default()
            .to_string())
    }

    /// Writes every artifact, the summary and the (unhashed) timing file.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
        for (name, bytes) in self.artifacts(cfg)? {
            io::write_file(dir, name, &bytes)?;
        }
        let summary = self.summary(cfg)?;
        io::write_file(dir, SUMMARY_FILE, summary.as_bytes())?;
        io::write_file(
            dir,
            TIMING_FILE,
            timing_text(self.training.train_time_s).as_bytes(),
        )?;
        Ok(summary)
    }
}

pub fn timing_text(train_time_s: f64) -> String {
    format!("train_time_s = {}\n", train_time_s)
}

/// Applies the `--check` thresholds.
pub fn check(cfg: &ExperimentConfig, m: &Metrics) -> Result<()> {
    if m.p_false.is_nan() || m.p_false > cfg.check.max_p_false {
        return Err(HarnessError::Check(format!(
            "p_false {} exceeds {}",
            m.p_false, cfg.check.max_p_false
        )));
    }
    if cfg.check.require_identifiable && !m.identifiable {
        return Err(HarnessError::Check(format!(
            "not identifiable: d_intra_worst {} ppm >= d_inter_worst {} ppm",
            m.d_intra_worst_ppm, m.d_inter_worst_ppm
        )));
    }
    Ok(())
}
