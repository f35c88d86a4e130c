//! Dataset generation: training and evaluation frames with disjoint seed
//! namespaces, plus the challenge replays used by the PUF distance report.

use rayon::prelude::*;
use rfpuf_core::ann::LabeledSet;
use rfpuf_core::channel::{sample_channel, ChannelState};
use rfpuf_core::features::{
    fit_normalization, FeatureVector, NormalizationParams, DEVICE_FEATURES, N_FEATURES,
};
use rfpuf_core::pipeline::{simulate_frame, LinkConfig};
use rfpuf_core::seed::{mix, Namespace};
use rfpuf_core::txmodel::{sample_population, TxProfile};

use crate::config::ExperimentConfig;
use crate::error::{Result, Stage};

/// Rejected frames are retried with freshly derived seeds this many times in
/// total before the failure is surfaced.
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Eval,
    Challenge,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Challenge => "challenge",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "eval" => Some(Split::Eval),
            "challenge" => Some(Split::Challenge),
            _ => None,
        }
    }

    fn namespaces(self) -> (Namespace, Namespace, Namespace) {
        match self {
            Split::Train => (
                Namespace::TrainPrbs,
                Namespace::TrainChannel,
                Namespace::TrainNoise,
            ),
            Split::Eval => (
                Namespace::EvalPrbs,
                Namespace::EvalChannel,
                Namespace::EvalNoise,
            ),
            Split::Challenge => (
                Namespace::Challenge,
                Namespace::ChallengeChannel,
                Namespace::ChallengeNoise,
            ),
        }
    }
}

/// One simulated frame and the seeds that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub split: Split,
    pub device_id: usize,
    pub frame_index: usize,
    /// 0 unless earlier attempts were rejected.
    pub attempt: u32,
    pub prbs_seed: u64,
    pub channel_seed: u64,
    pub noise_seed: u64,
    pub channel: ChannelState,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub population: Vec<TxProfile>,
    pub train: Vec<FrameRecord>,
    pub eval: Vec<FrameRecord>,
    pub challenge: Vec<FrameRecord>,
    /// Fitted on the training rows only.
    pub normalization: NormalizationParams,
}

/// Seeds for one attempt at one frame. Challenge frames share a single
/// bit-stream across devices and replays.
pub fn frame_seeds(
    master: u64,
    split: Split,
    device: usize,
    frame: usize,
    attempt: u32,
) -> (u64, u64, u64) {
    let (prbs_ns, channel_ns, noise_ns) = split.namespaces();
    let key = frame as u64 | (attempt as u64) << 32;
    let d = device as u64;
    let prbs = match split {
        Split::Challenge => mix(master, prbs_ns, 0, attempt as u64),
        _ => mix(master, prbs_ns, d, key),
    };
    (
        prbs,
        mix(master, channel_ns, d, key),
        mix(master, noise_ns, d, key),
    )
}

pub fn population_seed(master: u64) -> u64 {
    mix(master, Namespace::Population, 0, 0)
}

pub fn generate_population(cfg: &ExperimentConfig) -> Result<Vec<TxProfile>> {
    sample_population(
        cfg.population.n_tx,
        &cfg.population.variation,
        population_seed(cfg.master_seed),
    )
    .stage("population")
}

fn simulate_record(
    cfg: &ExperimentConfig,
    link: &LinkConfig,
    profile: &TxProfile,
    split: Split,
    frame_index: usize,
) -> Result<FrameRecord> {
    let mut attempt = 0;
    loop {
        let (prbs_seed, channel_seed, noise_seed) = frame_seeds(
            cfg.master_seed,
            split,
            profile.device_id,
            frame_index,
            attempt,
        );
        let channel = sample_channel(&cfg.channel, channel_seed).stage("channel")?;
        match simulate_frame(profile, prbs_seed, &channel, noise_seed, link) {
            Ok(features) => {
                return Ok(FrameRecord {
                    split,
                    device_id: profile.device_id,
                    frame_index,
                    attempt,
                    prbs_seed,
                    channel_seed,
                    noise_seed,
                    channel,
                    features,
                })
            }
            Err(rfpuf_core::Error::FrameRejected(_)) if attempt + 1 < MAX_ATTEMPTS => attempt += 1,
            Err(e) => return Err(e).stage("frame simulation"),
        }
    }
}

/// Simulates `frames` frames for every device, in parallel, ordered by device
/// then frame index.
pub fn simulate_split(
    cfg: &ExperimentConfig,
    population: &[TxProfile],
    split: Split,
    frames: usize,
) -> Result<Vec<FrameRecord>> {
    let link = cfg.link();
    let jobs: Vec<(usize, usize)> = (0..population.len())
        .flat_map(|d| (0..frames).map(move |f| (d, f)))
        .collect();
    jobs.par_iter()
        .map(|&(d, f)| simulate_record(cfg, &link, &population[d], split, f))
        .collect()
}

pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let population = generate_population(cfg)?;
    let train = simulate_split(
        cfg,
        &population,
        Split::Train,
        cfg.training.frames_per_device,
    )?;
    let eval = simulate_split(
        cfg,
        &population,
        Split::Eval,
        cfg.evaluation.frames_per_device,
    )?;
    let challenge = simulate_split(
        cfg,
        &population,
        Split::Challenge,
        cfg.evaluation.challenge_replays,
    )?;
    let normalization = fit_normalization(&train.iter().map(|r| r.features).collect::<Vec<_>>())
        .stage("normalization")?;
    Ok(Dataset {
        population,
        train,
        eval,
        challenge,
        normalization,
    })
}

/// Normalized rows labelled by device id.
pub fn labeled_set(
    records: &[FrameRecord],
    normalization: &NormalizationParams,
) -> Result<LabeledSet> {
    let mut set = LabeledSet::new(N_FEATURES);
    for r in records {
        let x = normalization.apply(&r.features).stage("normalization")?;
        set.push(&x.values, r.device_id).stage("dataset")?;
    }
    Ok(set)
}

/// Device features grouped per device, in device order: `out[d][k]` is the
/// `k`-th response of device `d`.
pub fn device_responses(records: &[FrameRecord], n_devices: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); n_devices];
    for r in records {
        out[r.device_id].push(
            DEVICE_FEATURES
                .iter()
                .map(|&i| r.features.values[i])
                .collect(),
        );
    }
    out
}

impl Dataset {
    pub fn n_devices(&self) -> usize {
        self.population.len()
    }

    pub fn train_set(&self) -> Result<LabeledSet> {
        labeled_set(&self.train, &self.normalization)
    }

    pub fn eval_set(&self) -> Result<LabeledSet> {
        labeled_set(&self.eval, &self.normalization)
    }

    pub fn retried_frames(&self) -> usize {
        self.train
            .iter()
            .chain(&self.eval)
            .chain(&self.challenge)
            .filter(|r| r.attempt > 0)
            .count()
    }
}
