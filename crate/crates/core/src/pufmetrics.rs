//! PUF quality: false-detection probability, worst-case intra/inter-device
//! response distances, identifiability and challenge-response strength.
//!
//! Distances are in "ppm": each feature's absolute deviation divided by that
//! feature's population scale, times 10^6, combined across features by a
//! geometric mean.

#[allow(unused_imports)]
use crate::math::{exp, floor, ln, log10, powf};
use alloc::string::String;
use alloc::vec::Vec;
use num_bigint::BigUint;

use crate::ann::{Classifier, LabeledSet};
use crate::error::ensure;
use crate::{Error, Result};

/// Guard added to every per-feature deviation before the geometric mean (and
/// subtracted afterwards) so one exactly-equal feature cannot zero the distance.
pub const GEOMEAN_GUARD_PPM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub p_false: f64,
    /// `None` for classes with no evaluation samples.
    pub per_class_accuracy: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum()
    }
}

/// Classifies every sample and tallies the confusion matrix.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, data: &LabeledSet) -> Result<EvalReport> {
    ensure!(!data.is_empty(), InvalidInput, "evaluation set is empty");
    let n = model.n_classes();
    ensure!(
        data.labels.iter().all(|l| *l < n),
        InvalidInput,
        "evaluation labels exceed the model's {} classes",
        n
    );
    let mut confusion = alloc::vec![alloc::vec![0u64; n]; n];
    for i in 0..data.len() {
        let predicted = model.predict(data.row(i))?;
        ensure!(
            predicted < n,
            InvalidInput,
            "classifier returned class {} of {}",
            predicted,
            n
        );
        confusion[data.labels[i]][predicted] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let count: u64 = row.iter().sum();
            (count > 0).then(|| row[i] as f64 / count as f64)
        })
        .collect();
    Ok(EvalReport {
        confusion,
        p_false: 1.0 - correct as f64 / total as f64,
        per_class_accuracy,
    })
}

/// Geometric-mean ppm distance between two responses.
pub fn feature_distance_ppm(y1: &[f64], y2: &[f64], scales: &[f64]) -> Result<f64> {
    if y1.len() != y2.len() {
        return Err(Error::DimensionMismatch {
            expected: y1.len(),
            actual: y2.len(),
        });
    }
    if scales.len() != y1.len() {
        return Err(Error::DimensionMismatch {
            expected: y1.len(),
            actual: scales.len(),
        });
    }
    ensure!(!y1.is_empty(), InvalidInput, "responses have no features");
    ensure!(
        scales.iter().all(|s| *s > 0.0),
        InvalidInput,
        "feature scales must be > 0"
    );
    if y1 == y2 {
        return Ok(0.0);
    }
    let log_sum: f64 = y1
        .iter()
        .zip(y2)
        .zip(scales)
        .map(|((a, b), s)| ln((a - b).abs() / s * 1e6 + GEOMEAN_GUARD_PPM))
        .sum();
    Ok((exp(log_sum / y1.len() as f64) - GEOMEAN_GUARD_PPM).max(0.0))
}

/// Worst-case intra-device distance.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraReport {
    /// Largest pairwise distance among each device's own evaluations.
    pub per_device: Vec<f64>,
    pub worst_ppm: f64,
    pub worst_device: usize,
}

/// `responses[d]` holds device `d`'s evaluations of the challenge.
pub fn intra_puf(responses: &[Vec<Vec<f64>>], scales: &[f64]) -> Result<IntraReport> {
    ensure!(!responses.is_empty(), InvalidInput, "no devices");
    let mut per_device = Vec::with_capacity(responses.len());
    for (d, evals) in responses.iter().enumerate() {
        ensure!(
            evals.len() >= 2,
            InvalidInput,
            "device {} has {} evaluation(s); need 2",
            d,
            evals.len()
        );
        let mut worst = 0.0f64;
        for i in 0..evals.len() {
            for j in i + 1..evals.len() {
                worst = worst.max(feature_distance_ppm(&evals[i], &evals[j], scales)?);
            }
        }
        per_device.push(worst);
    }
    let worst_device =
        (0..per_device.len()).fold(0, |b, i| if per_device[i] > per_device[b] { i } else { b });
    Ok(IntraReport {
        worst_ppm: per_device[worst_device],
        worst_device,
        per_device,
    })
}

/// Worst-case inter-device distance (the closest pair).
#[derive(Debug, Clone, PartialEq)]
pub struct InterReport {
    /// `(device_a, device_b, distance)` for every `a < b`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub worst_ppm: f64,
    pub worst_pair: (usize, usize),
}

/// `representatives[d]` is one response per device (a centroid or a single
/// evaluation).
pub fn inter_puf(representatives: &[Vec<f64>], scales: &[f64]) -> Result<InterReport> {
    ensure!(
        representatives.len() >= 2,
        InvalidInput,
        "need at least 2 devices"
    );
    let n = representatives.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut worst = (f64::INFINITY, (0, 1));
    for a in 0..n {
        for b in a + 1..n {
            let d = feature_distance_ppm(&representatives[a], &representatives[b], scales)?;
            if d < worst.0 {
                worst = (d, (a, b));
            }
            pairs.push((a, b, d));
        }
    }
    Ok(InterReport {
        pairs,
        worst_ppm: worst.0,
        worst_pair: worst.1,
    })
}

/// Per-device mean response.
pub fn centroids(responses: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    responses
        .iter()
        .enumerate()
        .map(|(d, evals)| {
            ensure!(
                !evals.is_empty(),
                InvalidInput,
                "device {} has no evaluations",
                d
            );
            let mut c = alloc::vec![0.0; evals[0].len()];
            for e in evals {
                if e.len() != c.len() {
                    return Err(Error::DimensionMismatch {
                        expected: c.len(),
                        actual: e.len(),
                    });
                }
                for (acc, v) in c.iter_mut().zip(e) {
                    *acc += v;
                }
            }
            c.iter_mut().for_each(|v| *v /= evals.len() as f64);
            Ok(c)
        })
        .collect()
}

/// How each device is represented in the inter-device comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InterMode {
    #[default]
    Centroid,
    /// First evaluation of each device.
    SingleResponse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PufDistanceReport {
    pub d_intra_worst_ppm: f64,
    pub d_inter_worst_ppm: f64,
    pub identifiable: bool,
    pub intra: IntraReport,
    pub inter: InterReport,
}

pub fn puf_distance_report(
    responses: &[Vec<Vec<f64>>],
    scales: &[f64],
    mode: InterMode,
) -> Result<PufDistanceReport> {
    let intra = intra_puf(responses, scales)?;
    let reps = match mode {
        InterMode::Centroid => centroids(responses)?,
        InterMode::SingleResponse => responses.iter().map(|r| r[0].clone()).collect(),
    };
    let inter = inter_puf(&reps, scales)?;
    let verdict = identifiability(intra.worst_ppm, inter.worst_ppm);
    Ok(PufDistanceReport {
        d_intra_worst_ppm: intra.worst_ppm,
        d_inter_worst_ppm: inter.worst_ppm,
        identifiable: verdict.identifiable,
        intra,
        inter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identifiability {
    pub identifiable: bool,
    pub margin_ppm: f64,
}

/// Identifiable iff the worst intra distance is strictly below the worst
/// inter distance.
pub fn identifiability(d_intra_worst_ppm: f64, d_inter_worst_ppm: f64) -> Identifiability {
    Identifiability {
        identifiable: d_intra_worst_ppm < d_inter_worst_ppm,
        margin_ppm: d_inter_worst_ppm - d_intra_worst_ppm,
    }
}

impl PufDistanceReport {
    pub fn identifiability(&self) -> Identifiability {
        identifiability(self.d_intra_worst_ppm, self.d_inter_worst_ppm)
    }
}

/// Challenge-response space of a device described by `n_features` values of
/// `bits_per_feature` bits each.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpStrength {
    pub count: BigUint,
    /// Chance of guessing a response outright, e.g. `"3.55e-15"`.
    pub guess_probability: String,
}

pub fn crp_count(n_features: usize, bits_per_feature: usize) -> Result<CrpStrength> {
    ensure!(n_features >= 1, InvalidInput, "need at least one feature");
    ensure!(
        bits_per_feature >= 1,
        InvalidInput,
        "need at least one bit per feature"
    );
    let exponent = n_features * bits_per_feature;
    let count = BigUint::from(1u8) << exponent;
    let log10 = -(exponent as f64) * log10(2f64);
    let mut decade = floor(log10);
    let mut mantissa = powf(10f64, log10 - decade);
    if mantissa >= 9.995 {
        mantissa /= 10.0;
        decade += 1.0;
    }
    Ok(CrpStrength {
        count,
        guess_probability: alloc::format!("{:.2}e{}", mantissa, decade as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;
    use alloc::vec;

    struct Oracle;
    impl Classifier for Oracle {
        fn n_classes(&self) -> usize {
            4
        }
        fn predict(&self, x: &[f64]) -> Result<usize> {
            Ok(x[0] as usize)
        }
    }

    struct Constant(usize);
    impl Classifier for Constant {
        fn n_classes(&self) -> usize {
            4
        }
        fn predict(&self, _: &[f64]) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn balanced() -> LabeledSet {
        let mut s = LabeledSet::new(1);
        for i in 0..40 {
            s.push(&[(i % 4) as f64], i % 4).unwrap();
        }
        s
    }

    #[test]
    fn oracle_and_constant_classifiers() {
        let r = evaluate(&Oracle, &balanced()).unwrap();
        assert_eq!(r.p_false, 0.0);
        assert!(r.per_class_accuracy.iter().all(|a| *a == Some(1.0)));
        let r = evaluate(&Constant(2), &balanced()).unwrap();
        assert!((r.p_false - 0.75).abs() < 1e-15);
        assert_eq!(r.confusion[0][2], 10);
        assert_eq!(r.total(), 40);
        assert_eq!(r.p_false, 1.0 - r.correct() as f64 / r.total() as f64);
        assert!(evaluate(&Oracle, &LabeledSet::new(1)).is_err());
    }

    #[test]
    fn distance_examples() {
        let s = [1.0, 1.0];
        assert_eq!(
            feature_distance_ppm(&[0.3, 0.4], &[0.3, 0.4], &s).unwrap(),
            0.0
        );
        let d = feature_distance_ppm(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[1.0; 3]).unwrap();
        assert!((d / 1e6 - 1.0).abs() < 1e-12);
        let d = feature_distance_ppm(&[0.0, 0.0], &[100e-6, 400e-6], &s).unwrap();
        assert!((d - 200.0).abs() < 1e-3, "{d}");
        assert!(feature_distance_ppm(&[0.0], &[0.0, 1.0], &s).is_err());
        assert!(feature_distance_ppm(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn intra_with_injected_deltas() {
        // Device 0: evaluations differ by (1e-4, 4e-4) in scale units -> 200 ppm.
        // Device 1: deltas (1e-5, 1e-5) -> 10 ppm.
        let responses = vec![
            vec![vec![0.0, 0.0], vec![1e-4, 4e-4]],
            vec![vec![5.0, 5.0], vec![5.0 + 1e-5, 5.0 - 1e-5]],
        ];
        let r = intra_puf(&responses, &[1.0, 1.0]).unwrap();
        let expect0 = sqrt((100.0f64 + 1e-3) * (400.0 + 1e-3)) - 1e-3;
        assert!((r.per_device[0] - expect0).abs() < 1e-9);
        assert!((r.per_device[1] - 10.0).abs() < 1e-6);
        assert_eq!(r.worst_device, 0);
        assert!(intra_puf(&[vec![vec![0.0, 0.0]]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn inter_picks_closest_pair() {
        let reps = vec![vec![0.0, 0.0], vec![3e-6, 3e-6], vec![2.5e-6, 2e-6]];
        let r = inter_puf(&reps, &[1.0, 1.0]).unwrap();
        let brute: Vec<f64> = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(a, b): &(usize, usize)| {
                let d0 = (reps[a][0] - reps[b][0]).abs() * 1e6 + 1e-3;
                let d1 = (reps[a][1] - reps[b][1]).abs() * 1e6 + 1e-3;
                sqrt(d0 * d1) - 1e-3
            })
            .collect();
        let min = brute.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((r.worst_ppm - min).abs() < 1e-9);
        assert_eq!(r.worst_pair, (1, 2));
        assert_eq!(r.pairs.len(), 3);
        assert!(inter_puf(&reps[..1], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn clones_are_not_identifiable() {
        let responses = vec![vec![vec![1.0, 2.0]; 3], vec![vec![1.0, 2.0]; 3]];
        let r = puf_distance_report(&responses, &[1.0, 1.0], InterMode::Centroid).unwrap();
        assert_eq!(r.d_inter_worst_ppm, 0.0);
        assert_eq!(r.d_intra_worst_ppm, 0.0);
        assert!(!r.identifiable);
    }

    #[test]
    fn identifiability_cases() {
        let v = identifiability(2.9, 3.9);
        assert!(v.identifiable);
        assert!((v.margin_ppm - 1.0).abs() < 1e-12);
        assert!(!identifiability(3.0, 3.0).identifiable);
        assert!(!identifiability(0.0, 0.0).identifiable);
    }

    #[test]
    fn crp_counts() {
        assert_eq!(crp_count(1, 16).unwrap().count, BigUint::from(65536u32));
        let three = crp_count(3, 16).unwrap();
        assert_eq!(three.count, BigUint::from(281_474_976_710_656u64));
        assert_eq!(three.guess_probability, "3.55e-15");
        assert_eq!(
            crp_count(9, 16).unwrap().count,
            BigUint::from(2u8).pow(144u32)
        );
        assert!(crp_count(0, 16).is_err());
    }
}
