//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::dataset::generate_dataset;
use crate::error::{HarnessError, Result};
use crate::experiment::{
    check, dataset_artifacts, evaluate_on, evaluation_artifacts, fit_rows, puf_on, run_experiment,
    timing_text, train_on, training_artifacts, Metrics, Rows, CONFIG_ECHO_FILE, TIMING_FILE,
};
use crate::io;
use crate::model::{ModelFile, MODEL_FILE};
use crate::sweep::{run_sweep, write_sweep, SweepSpec, SweepVariable};

#[derive(Debug, Parser)]
#[command(
    name = "rfpuf",
    version,
    about = "RF-PUF transmitter identification simulator"
)]
pub struct Cli {
    /// Experiment config (TOML). Defaults to the built-in desk-scale setup, or
    /// to the config echoed into the output directory for train/eval.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip the receive matched filter.
    #[arg(long, global = true)]
    pub rrc_ablation: bool,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Exit with status 3 when the results miss the config's [check]
    /// thresholds.
    #[arg(long, global = true)]
    pub check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the population and write the feature datasets.
    Gen,
    /// Train on the stored training features.
    Train,
    /// Evaluate the stored model and compute the PUF distance report.
    Eval,
    /// Full pipeline: gen, train and eval in one go.
    Run,
    /// Run one experiment per value of a config variable.
    Sweep {
        /// n_tx, hidden_width or ebn0_sigma_db.
        #[arg(long)]
        variable: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Recompute the headline metrics from the stored CSVs.
    Report,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let echoed = self.out.as_ref().map(|o| o.join(CONFIG_ECHO_FILE));
                match (&self.command, echoed) {
                    (Command::Train | Command::Eval | Command::Report, Some(p)) if p.exists() => {
                        ExperimentConfig::load(&p)?
                    }
                    _ => ExperimentConfig::default(),
                }
            }
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if self.rrc_ablation {
            cfg.rrc_ablation = true;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn say(&self, text: &str) {
        if !self.quiet {
            print!("{}", text);
        }
    }

    fn finish(&self, cfg: &ExperimentConfig, m: &Metrics) -> Result<()> {
        self.say(&format_metrics(m));
        if self.check {
            check(cfg, m)?;
        }
        Ok(())
    }
}

fn format_metrics(m: &Metrics) -> String {
    format!(
        "p_false = {}\nd_intra_worst_ppm = {}\nd_inter_worst_ppm = {}\nidentifiable = {}\n",
        m.p_false, m.d_intra_worst_ppm, m.d_inter_worst_ppm, m.identifiable
    )
}

fn read_rows(dir: &Path, name: &str) -> Result<Rows> {
    Ok(Rows::from_feature_rows(&io::read_features_csv(
        &dir.join(name),
    )?))
}

fn n_devices(dir: &Path, fallback: &Rows) -> Result<usize> {
    let path = dir.join(io::POPULATION_FILE);
    if !path.exists() {
        return Ok(fallback.n_classes());
    }
    let mut r =
        csv::Reader::from_path(&path).map_err(|e| HarnessError::format(&path, e.to_string()))?;
    Ok(r.records().count())
}

fn write_all(dir: &Path, files: Vec<(&'static str, Vec<u8>)>) -> Result<()> {
    files
        .iter()
        .try_for_each(|(name, bytes)| io::write_file(dir, name, bytes))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let dir = cfg.output_dir.clone();
    match &cli.command {
        Command::Gen => {
            let d = generate_dataset(&cfg)?;
            write_all(&dir, dataset_artifacts(&cfg, &d)?)?;
            cli.say(&format!(
                "wrote {} train, {} eval and {} challenge frames for {} devices to {}\n",
                d.train.len(),
                d.eval.len(),
                d.challenge.len(),
                d.n_devices(),
                dir.display()
            ));
            Ok(())
        }
        Command::Train => {
            let train_rows = read_rows(&dir, io::FEATURES_FILE_TRAIN)?;
            let eval_path = dir.join(io::FEATURES_FILE_EVAL);
            let eval_rows = if eval_path.exists() {
                Some(read_rows(&dir, io::FEATURES_FILE_EVAL)?)
            } else {
                None
            };
            let n = n_devices(&dir, &train_rows)?;
            let normalization = fit_rows(&train_rows)?;
            let t = train_on(&cfg, &normalization, &train_rows, eval_rows.as_ref(), n)?;
            write_all(&dir, training_artifacts(&t))?;
            io::write_file(&dir, TIMING_FILE, timing_text(t.train_time_s).as_bytes())?;
            cli.say(&format!(
                "trained {} epochs, final loss {}, in {:.2} s\n",
                t.report.loss.len(),
                t.report.loss.last().copied().unwrap_or(f64::NAN),
                t.train_time_s
            ));
            Ok(())
        }
        Command::Eval => {
            let model = ModelFile::load(&dir.join(MODEL_FILE))?;
            let eval = evaluate_on(&model, &read_rows(&dir, io::FEATURES_FILE_EVAL)?)?;
            let challenge = read_rows(&dir, io::FEATURES_FILE_CHALLENGE)?;
            let puf = puf_on(&cfg, &challenge, model.model.n_outputs())?;
            write_all(&dir, evaluation_artifacts(&eval, &puf))?;
            let r = &puf.report;
            let m = Metrics {
                p_false: eval.p_false,
                d_intra_worst_ppm: r.d_intra_worst_ppm,
                d_inter_worst_ppm: r.d_inter_worst_ppm,
                identifiable: r.identifiable,
            };
            cli.finish(&cfg, &m)
        }
        Command::Run => {
            let result = run_experiment(&cfg)?;
            let summary = result.write(&cfg, &dir)?;
            cli.say(&summary);
            if cli.check {
                check(&cfg, &result.metrics())?;
            }
            Ok(())
        }
        Command::Sweep { variable, values } => {
            let variable: SweepVariable = variable.parse()?;
            let spec = SweepSpec {
                variable,
                values: values.clone(),
                base: cfg.clone(),
            };
            let points = run_sweep(&spec)?;
            write_sweep(&dir, variable, &points)?;
            cli.say(&String::from_utf8_lossy(&crate::sweep::sweep_csv(
                variable, &points,
            )));
            let failed: Vec<String> = points
                .iter()
                .filter_map(|p| {
                    p.result
                        .as_ref()
                        .err()
                        .map(|e| format!("{}: {}", p.value, e))
                })
                .collect();
            if !failed.is_empty() {
                return Err(HarnessError::Sweep(failed.join("; ")));
            }
            if cli.check {
                for p in &points {
                    if let (Some(c), Ok(r)) = (&p.config, &p.result) {
                        check(c, &r.metrics()).map_err(|e| {
                            HarnessError::Check(format!(
                                "{} = {}: {}",
                                variable.as_str(),
                                p.value,
                                e
                            ))
                        })?;
                    }
                }
            }
            Ok(())
        }
        Command::Report => {
            let m = report_metrics(&dir)?;
            cli.finish(&cfg, &m)
        }
    }
}

/// Headline metrics recomputed from `confusion.csv`, `puf_intra.csv` and
/// `puf_inter.csv`.
pub fn report_metrics(dir: &Path) -> Result<Metrics> {
    let confusion = io::read_confusion(&dir.join(io::CONFUSION_FILE))?;
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
    if total == 0 {
        return Err(HarnessError::format(
            dir.join(io::CONFUSION_FILE),
            "confusion matrix is empty",
        ));
    }
    let intra = io::read_intra(&dir.join(io::INTRA_FILE))?;
    let inter = io::read_inter(&dir.join(io::INTER_FILE))?;
    if intra.is_empty() || inter.is_empty() {
        return Err(HarnessError::format(dir, "PUF distance tables are empty"));
    }
    let d_intra = intra.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d_inter = inter.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(Metrics {
        p_false: 1.0 - correct as f64 / total as f64,
        d_intra_worst_ppm: d_intra,
        d_inter_worst_ppm: d_inter,
        identifiable: rfpuf_core::pufmetrics::identifiability(d_intra, d_inter).identifiable,
    })
}
