//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use rfpuf_core::ann::TrainConfig;
use rfpuf_core::channel::ChannelConfig;
use rfpuf_core::pipeline::LinkConfig;
use rfpuf_core::pufmetrics::InterMode;
use rfpuf_core::rxchain::RxConfig;
use rfpuf_core::txmodel::VariationConfig;
use rfpuf_core::RrcParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Skip the receive matched filter.
    pub rrc_ablation: bool,
    pub output_dir: PathBuf,
    pub population: PopulationConfig,
    pub channel: ChannelConfig,
    pub frame: FrameConfig,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
    pub check: CheckConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub n_tx: usize,
    pub variation: VariationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub symbols_per_frame: usize,
    pub symbol_rate_hz: f64,
    pub fft_size: usize,
    /// Run the symbol-rate frequency refinement after the periodogram.
    pub refine_cfo: bool,
    pub rrc: RrcParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub frames_per_device: usize,
    pub mlp: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub frames_per_device: usize,
    /// Replays of the shared challenge per device, used for the PUF
    /// distance report.
    pub challenge_replays: usize,
    pub inter_mode: InterMode,
}

/// Thresholds applied by `--check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub max_p_false: f64,
    pub require_identifiable: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 1,
            rrc_ablation: false,
            output_dir: PathBuf::from("out"),
            population: PopulationConfig::default(),
            channel: ChannelConfig {
                ebn0_mean_db: 20.0,
                ebn0_sigma_db: 5.0,
                ..ChannelConfig::default()
            },
            frame: FrameConfig::default(),
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
            check: CheckConfig::default(),
        }
    }
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            n_tx: 50,
            variation: VariationConfig::default(),
        }
    }
}

impl Default for FrameConfig {
    fn default() -> Self {
        let rx = RxConfig::default();
        FrameConfig {
            symbols_per_frame: 1024,
            symbol_rate_hz: 1e6,
            fft_size: rx.fft_size,
            refine_cfo: rx.refine,
            rrc: rx.rrc,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            frames_per_device: 20,
            mlp: TrainConfig::default(),
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            frames_per_device: 10,
            challenge_replays: 10,
            inter_mode: InterMode::Centroid,
        }
    }
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_p_false: 0.05,
            require_identifiable: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {}", path.display(), e)))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {}", path.display(), m)),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.master_seed > i64::MAX as u64 {
            return bad("master_seed must fit in a signed 64-bit integer".into());
        }
        if self.population.n_tx < 2 {
            return bad("population.n_tx must be >= 2".into());
        }
        if self.training.frames_per_device < 2 {
            return bad("training.frames_per_device must be >= 2".into());
        }
        if self.evaluation.frames_per_device < 1 {
            return bad("evaluation.frames_per_device must be >= 1".into());
        }
        if self.evaluation.challenge_replays < 2 {
            return bad("evaluation.challenge_replays must be >= 2".into());
        }
        if !(self.check.max_p_false >= 0.0 && self.check.max_p_false <= 1.0) {
            return bad("check.max_p_false must lie in [0, 1]".into());
        }
        if !(self.frame.symbol_rate_hz > 0.0 && self.frame.symbol_rate_hz.is_finite()) {
            return bad("frame.symbol_rate_hz must be > 0".into());
        }
        if !self.frame.fft_size.is_power_of_two() || self.frame.fft_size < 16 {
            return bad("frame.fft_size must be a power of two >= 16".into());
        }
        let samples = (self.frame.symbols_per_frame + self.frame.rrc.span_symbols)
            * self.frame.rrc.oversampling;
        if samples < self.frame.fft_size {
            return bad(format!(
                "a frame of {} samples is shorter than frame.fft_size {}",
                samples, self.frame.fft_size
            ));
        }
        let core = |r: rfpuf_core::Result<()>| r.map_err(|e| HarnessError::Config(e.to_string()));
        core(self.population.variation.validate())?;
        core(self.channel.validate())?;
        core(self.frame.rrc.validate())?;
        core(self.training.mlp.validate())?;
        Ok(())
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            symbols_per_frame: self.frame.symbols_per_frame,
            symbol_rate_hz: self.frame.symbol_rate_hz,
            carrier_freq_hz: self.population.variation.carrier_freq_hz,
            rx: RxConfig {
                rrc: self.frame.rrc,
                fft_size: self.frame.fft_size,
                rrc_ablation: self.rrc_ablation,
                refine: self.frame.refine_cfo,
            },
        }
    }
}
