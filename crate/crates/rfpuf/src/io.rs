//! CSV layouts. Every table is built in memory first so a run can hash its
//! outputs before writing them; floats use Rust's shortest round-trip
//! formatting so reading a table back reproduces the values bit for bit.

use std::fs;
use std::path::Path;

use rfpuf_core::ann::TrainReport;
use rfpuf_core::features::{FeatureVector, NormalizationParams, FEATURE_NAMES, N_FEATURES};
use rfpuf_core::pufmetrics::{EvalReport, PufDistanceReport};
use rfpuf_core::txmodel::TxProfile;

use crate::dataset::{FrameRecord, Split};
use crate::error::{HarnessError, Result};

pub const FEATURES_FILE_TRAIN: &str = "train_features.csv";
pub const FEATURES_FILE_EVAL: &str = "eval_features.csv";
pub const FEATURES_FILE_CHALLENGE: &str = "challenge_features.csv";
pub const POPULATION_FILE: &str = "population.csv";
pub const MANIFEST_FILE: &str = "frames.csv";
pub const NORMALIZATION_FILE: &str = "normalization.csv";
pub const LOSS_FILE: &str = "training_loss.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const INTRA_FILE: &str = "puf_intra.csv";
pub const INTER_FILE: &str = "puf_inter.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const FRAME_META: [&str; 5] = [
    "device_id",
    "ebn0_db",
    "attenuation_db",
    "doppler_hz",
    "prbs_seed",
];

fn num(x: f64) -> String {
    format!("{}", x)
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::format(
            path,
            format!("unexpected header, want {}", expected.join(",")),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::format(path, format!("{:?}", other)),
    }
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        HarnessError::format(path, format!("bad value in column {} of {:?}", i + 1, rec))
    })
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn features_header() -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .chain(FRAME_META.iter())
        .copied()
        .collect()
}

/// Raw (unnormalized) features, one row per frame.
pub fn features_csv(records: &[FrameRecord]) -> Vec<u8> {
    table(
        &features_header(),
        records.iter().map(|r| {
            let mut row: Vec<String> = r.features.values.iter().map(|v| num(*v)).collect();
            row.push(r.device_id.to_string());
            row.push(num(r.channel.ebn0_db));
            row.push(num(r.channel.attenuation_db));
            row.push(num(r.channel.doppler_hz));
            row.push(r.prbs_seed.to_string());
            row
        }),
    )
}

/// One row of a features table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub device_id: usize,
    pub ebn0_db: f64,
    pub attenuation_db: f64,
    pub doppler_hz: f64,
    pub prbs_seed: u64,
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    read_table(path, &features_header())?
        .iter()
        .map(|rec| {
            let mut values = [0.0; N_FEATURES];
            for (i, v) in values.iter_mut().enumerate() {
                *v = field(path, rec, i)?;
            }
            Ok(FeatureRow {
                features: FeatureVector::new(values),
                device_id: field(path, rec, N_FEATURES)?,
                ebn0_db: field(path, rec, N_FEATURES + 1)?,
                attenuation_db: field(path, rec, N_FEATURES + 2)?,
                doppler_hz: field(path, rec, N_FEATURES + 3)?,
                prbs_seed: field(path, rec, N_FEATURES + 4)?,
            })
        })
        .collect()
}

pub const POPULATION_HEADER: [&str; 9] = [
    "device_id",
    "cfo_hz",
    "gain_i",
    "gain_q",
    "phase_imbalance_rad",
    "dc_i",
    "dc_q",
    "pa_sat",
    "pa_smoothness",
];

pub fn population_csv(population: &[TxProfile]) -> Vec<u8> {
    table(
        &POPULATION_HEADER,
        population.iter().map(|p| {
            vec![
                p.device_id.to_string(),
                num(p.cfo_hz),
                num(p.gain_i),
                num(p.gain_q),
                num(p.phase_imbalance_rad),
                num(p.dc_i),
                num(p.dc_q),
                num(p.pa_sat),
                num(p.pa_smoothness),
            ]
        }),
    )
}

pub const MANIFEST_HEADER: [&str; 9] = [
    "split",
    "device_id",
    "frame_index",
    "attempt",
    "prbs_seed",
    "channel_seed",
    "noise_seed",
    "ebn0_db",
    "ebn0_clamped",
];

/// Which seeds produced which frame, for every split.
pub fn manifest_csv<'a>(records: impl IntoIterator<Item = &'a FrameRecord>) -> Vec<u8> {
    table(
        &MANIFEST_HEADER,
        records.into_iter().map(|r| {
            vec![
                r.split.as_str().to_string(),
                r.device_id.to_string(),
                r.frame_index.to_string(),
                r.attempt.to_string(),
                r.prbs_seed.to_string(),
                r.channel_seed.to_string(),
                r.noise_seed.to_string(),
                num(r.channel.ebn0_db),
                r.channel.ebn0_clamped.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub split: Split,
    pub device_id: usize,
    pub frame_index: usize,
    pub attempt: u32,
    pub prbs_seed: u64,
    pub channel_seed: u64,
    pub noise_seed: u64,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    read_table(path, &MANIFEST_HEADER)?
        .iter()
        .map(|rec| {
            let split = Split::parse(&rec[0]).ok_or_else(|| {
                HarnessError::format(path, format!("unknown split {:?}", &rec[0]))
            })?;
            Ok(ManifestRow {
                split,
                device_id: field(path, rec, 1)?,
                frame_index: field(path, rec, 2)?,
                attempt: field(path, rec, 3)?,
                prbs_seed: field(path, rec, 4)?,
                channel_seed: field(path, rec, 5)?,
                noise_seed: field(path, rec, 6)?,
            })
        })
        .collect()
}

pub fn normalization_csv(p: &NormalizationParams) -> Vec<u8> {
    table(
        &["feature", "mean", "scale", "degenerate"],
        FEATURE_NAMES.iter().enumerate().map(|(i, name)| {
            vec![
                name.to_string(),
                num(p.mean[i]),
                num(p.scale[i]),
                p.degenerate.contains(&i).to_string(),
            ]
        }),
    )
}

pub fn loss_csv(report: &TrainReport) -> Vec<u8> {
    table(
        &["epoch", "loss", "eval_accuracy"],
        report
            .loss
            .iter()
            .zip(&report.val_accuracy)
            .enumerate()
            .map(|(e, (l, a))| vec![e.to_string(), num(*l), num(*a)]),
    )
}

/// `confusion[true][predicted]` with one column per predicted device.
pub fn confusion_csv(report: &EvalReport) -> Vec<u8> {
    let n = report.confusion.len();
    let names: Vec<String> = (0..n).map(|p| format!("pred_{}", p)).collect();
    let mut header = vec!["true_device"];
    header.extend(names.iter().map(String::as_str));
    table(
        &header,
        report.confusion.iter().enumerate().map(|(t, row)| {
            std::iter::once(t.to_string())
                .chain(row.iter().map(|c| c.to_string()))
                .collect()
        }),
    )
}

pub fn read_confusion(path: &Path) -> Result<Vec<Vec<u64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let n = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .len()
        .saturating_sub(1);
    let mut matrix = Vec::new();
    for (t, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != n + 1 || field::<usize>(path, &rec, 0)? != t {
            return Err(HarnessError::format(path, format!("malformed row {}", t)));
        }
        matrix.push(
            (1..=n)
                .map(|i| field(path, &rec, i))
                .collect::<Result<Vec<u64>>>()?,
        );
    }
    if matrix.len() != n {
        return Err(HarnessError::format(path, "confusion matrix is not square"));
    }
    Ok(matrix)
}

pub const INTRA_HEADER: [&str; 2] = ["device_id", "d_intra_ppm"];
pub const INTER_HEADER: [&str; 3] = ["device_a", "device_b", "d_inter_ppm"];

pub fn intra_csv(report: &PufDistanceReport) -> Vec<u8> {
    table(
        &INTRA_HEADER,
        report
            .intra
            .per_device
            .iter()
            .enumerate()
            .map(|(d, v)| vec![d.to_string(), num(*v)]),
    )
}

pub fn inter_csv(report: &PufDistanceReport) -> Vec<u8> {
    table(
        &INTER_HEADER,
        report
            .inter
            .pairs
            .iter()
            .map(|(a, b, v)| vec![a.to_string(), b.to_string(), num(*v)]),
    )
}

pub fn read_intra(path: &Path) -> Result<Vec<f64>> {
    read_table(path, &INTRA_HEADER)?
        .iter()
        .map(|rec| field(path, rec, 1))
        .collect()
}

pub fn read_inter(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    read_table(path, &INTER_HEADER)?
        .iter()
        .map(|rec| {
            Ok((
                field(path, rec, 0)?,
                field(path, rec, 1)?,
                field(path, rec, 2)?,
            ))
        })
        .collect()
}
