//! Parameter sweeps: one experiment per value, one CSV row per experiment.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::dataset::generate_dataset;
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, run_with_dataset, RunResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    NTx,
    HiddenWidth,
    Ebn0SigmaDb,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::NTx => "n_tx",
            SweepVariable::HiddenWidth => "hidden_width",
            SweepVariable::Ebn0SigmaDb => "ebn0_sigma_db",
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, SweepVariable::Ebn0SigmaDb)
    }
}

impl FromStr for SweepVariable {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_tx" => Ok(SweepVariable::NTx),
            "hidden_width" => Ok(SweepVariable::HiddenWidth),
            "ebn0_sigma_db" => Ok(SweepVariable::Ebn0SigmaDb),
            other => Err(HarnessError::Config(format!(
                "unknown sweep variable {:?} (expected n_tx, hidden_width or ebn0_sigma_db)",
                other
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HarnessError::Config(
                "sweep needs at least one value".into(),
            ));
        }
        for &v in &self.values {
            if !v.is_finite() || v < 0.0 || (self.variable.is_integer() && v.fract() != 0.0) {
                return Err(HarnessError::Config(format!(
                    "invalid {} value {}",
                    self.variable.as_str(),
                    v
                )));
            }
        }
        self.base.validate()
    }

    /// The base config with the variable set to `value`.
    pub fn point(&self, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = self.base.clone();
        match self.variable {
            SweepVariable::NTx => cfg.population.n_tx = value as usize,
            SweepVariable::HiddenWidth => cfg.training.mlp.hidden_sizes = vec![value as usize],
            SweepVariable::Ebn0SigmaDb => cfg.channel.ebn0_sigma_db = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One sweep point. `result` holds the error text when the point failed.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub config: Option<ExperimentConfig>,
    pub result: std::result::Result<RunResult, String>,
}

/// Runs every point. Hidden-width points share one dataset; the other
/// variables change the frames, so each point simulates its own (the
/// population is the same wherever `n_tx` allows, since devices draw from
/// per-device seed streams). Points run in parallel; failures are recorded
/// and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let shared = match spec.variable {
        SweepVariable::HiddenWidth => Some(generate_dataset(&spec.base)?),
        _ => None,
    };
    Ok(spec
        .values
        .par_iter()
        .map(|&value| {
            let cfg = match spec.point(value) {
                Ok(c) => c,
                Err(e) => {
                    return SweepPoint {
                        value,
                        config: None,
                        result: Err(e.to_string()),
                    }
                }
            };
            let result = match &shared {
                Some(d) => run_with_dataset(&cfg, d.clone()),
                None => run_experiment(&cfg),
            };
            SweepPoint {
                value,
                config: Some(cfg),
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect())
}

pub const SWEEP_HEADER: [&str; 7] = [
    "variable",
    "value",
    "p_false",
    "d_intra_worst_ppm",
    "d_inter_worst_ppm",
    "train_time_s",
    "status",
];

pub fn sweep_csv(variable: SweepVariable, points: &[SweepPoint]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory csv");
    for p in points {
        let row = match &p.result {
            Ok(r) => {
                let m = r.metrics();
                vec![
                    variable.as_str().to_string(),
                    p.value.to_string(),
                    m.p_false.to_string(),
                    m.d_intra_worst_ppm.to_string(),
                    m.d_inter_worst_ppm.to_string(),
                    r.training.train_time_s.to_string(),
                    "ok".to_string(),
                ]
            }
            Err(e) => vec![
                variable.as_str().to_string(),
                p.value.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("error: {}", e),
            ],
        };
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Directory name of one point inside the sweep output directory.
pub fn point_dir_name(variable: SweepVariable, value: f64) -> String {
    format!("{}_{}", variable.as_str(), value)
}

/// Writes `sweep.csv` plus each successful point's run into its own
/// subdirectory.
pub fn write_sweep(dir: &Path, variable: SweepVariable, points: &[SweepPoint]) -> Result<()> {
    for p in points {
        if let (Some(cfg), Ok(r)) = (&p.config, &p.result) {
            r.write(cfg, &dir.join(point_dir_name(variable, p.value)))?;
        }
    }
    io::write_file(dir, io::SWEEP_FILE, &sweep_csv(variable, points))
}
