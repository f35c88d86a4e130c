//! The PUF response: a fixed 9-element feature vector per received frame,
//! and z-score normalization fitted on a training population.

#[allow(unused_imports)]
use crate::math::{sqrt, Polar};
use alloc::vec::Vec;

use crate::error::ensure;
use crate::rxchain::{nearest_point, point_slot, RxOutput};
use crate::{Complex, Error, Result};

pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "cfo_ppm",
    "ring1_amp",
    "ring2_amp",
    "ring3_amp",
    "ring1_phase_err_rad",
    "ring2_phase_err_rad",
    "ring3_phase_err_rad",
    "agc_gain_db",
    "noise_var_estimate",
];

/// Indices of the features that describe the transmitter rather than the
/// channel it was heard through.
pub const DEVICE_FEATURES: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];

/// Minimum average symbols per ring a frame must carry.
pub const MIN_SYMBOLS_PER_RING: usize = 16;

/// Standard deviations below this are treated as degenerate.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn new(values: [f64; N_FEATURES]) -> Self {
        FeatureVector { values }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        ensure_len(values.len())?;
        let mut v = [0.0; N_FEATURES];
        v.copy_from_slice(values);
        Ok(FeatureVector { values: v })
    }

    pub fn feature_names(&self) -> &'static [&'static str; N_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn ensure_len(actual: usize) -> Result<()> {
    if actual != N_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: N_FEATURES,
            actual,
        });
    }
    Ok(())
}

/// 16-QAM amplitude ring (0, 1, 2 for radii sqrt(2), sqrt(10), sqrt(18) over sqrt(10)).
pub fn ring_of(point: Complex) -> usize {
    let level = |x: f64| if (x * sqrt(10f64)).abs() > 2.0 { 1 } else { 0 };
    level(point.re) + level(point.im)
}

pub fn ring_radius(ring: usize) -> f64 {
    [sqrt(2f64), sqrt(10f64), sqrt(18f64)][ring] / sqrt(10f64)
}

/// Builds the response vector for one received frame.
pub fn extract_features(rx: &RxOutput, carrier_freq_hz: f64) -> Result<FeatureVector> {
    ensure!(
        carrier_freq_hz > 0.0,
        InvalidInput,
        "carrier frequency must be > 0"
    );
    ensure!(
        rx.symbols.len() >= 3 * MIN_SYMBOLS_PER_RING,
        FrameRejected,
        "{} symbols is too short for per-ring statistics",
        rx.symbols.len()
    );
    // Per constellation point: symbol count, summed magnitude, summed unit
    // phasor of (measured angle - ideal angle).
    let mut count = [0usize; 16];
    let mut amp = [0.0f64; 16];
    let mut phasor = [Complex::new(0.0, 0.0); 16];
    let mut ideal_of = [Complex::new(0.0, 0.0); 16];
    for s in &rx.symbols {
        let ideal = nearest_point(*s);
        let k = point_slot(ideal);
        ideal_of[k] = ideal;
        count[k] += 1;
        amp[k] += s.magnitude();
        let rel = s * ideal.conj();
        let mag = rel.magnitude();
        if mag > 0.0 {
            phasor[k] += rel / mag;
        }
    }
    // Points are weighted equally so the random point occupancy of a frame
    // does not leak into the ring statistics, and amplitudes are taken
    // relative to the whole constellation so the frame's data-dependent
    // power (which the AGC folds into its gain) cancels.
    let mut ring_points = [0usize; 3];
    let mut ring_ratio = [0.0f64; 3];
    let mut ring_phasor = [Complex::new(0.0, 0.0); 3];
    let mut all_ratio = 0.0;
    for k in 0..16 {
        if count[k] == 0 {
            continue;
        }
        let ring = ring_of(ideal_of[k]);
        let ratio = amp[k] / count[k] as f64 / ring_radius(ring);
        ring_points[ring] += 1;
        ring_ratio[ring] += ratio;
        all_ratio += ratio;
        let m = phasor[k].magnitude();
        if m > 0.0 {
            ring_phasor[ring] += phasor[k] / m;
        }
    }
    if let Some(ring) = ring_points.iter().position(|c| *c == 0) {
        return Err(Error::FrameRejected(alloc::format!(
            "no symbols landed on ring {}",
            ring + 1
        )));
    }
    let all_ratio = all_ratio / ring_points.iter().sum::<usize>() as f64;
    let mut values = [0.0; N_FEATURES];
    values[0] = rx.cfo_estimate_hz / carrier_freq_hz * 1e6;
    for ring in 0..3 {
        values[1 + ring] = ring_ratio[ring] / ring_points[ring] as f64 / all_ratio;
        values[4 + ring] = ring_phasor[ring].phase();
    }
    values[7] = rx.agc_gain_db;
    values[8] = rx.noise_var_estimate;
    let v = FeatureVector { values };
    ensure!(v.is_finite(), FrameRejected, "non-finite feature value");
    Ok(v)
}

/// Per-feature mean and scale of a training population.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationParams {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features whose spread fell below [`SCALE_FLOOR`].
    pub degenerate: Vec<usize>,
}

/// Population mean and (biased) standard deviation of each feature.
pub fn fit_normalization(vectors: &[FeatureVector]) -> Result<NormalizationParams> {
    ensure!(
        vectors.len() >= 2,
        InvalidInput,
        "need at least 2 vectors, got {}",
        vectors.len()
    );
    let n = vectors.len() as f64;
    let mut mean = alloc::vec![0.0; N_FEATURES];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = alloc::vec![0.0; N_FEATURES];
    for v in vectors {
        for ((s, x), m) in scale.iter_mut().zip(&v.values).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let mut degenerate = Vec::new();
    for (i, s) in scale.iter_mut().enumerate() {
        *s = sqrt(*s / n);
        if !(*s >= SCALE_FLOOR) {
            *s = SCALE_FLOOR;
            degenerate.push(i);
        }
    }
    Ok(NormalizationParams {
        mean,
        scale,
        degenerate,
    })
}

impl NormalizationParams {
    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        ensure_len(self.mean.len())?;
        let mut out = v.values;
        for ((o, m), s) in out.iter_mut().zip(&self.mean).zip(&self.scale) {
            *o = (*o - m) / s;
        }
        Ok(FeatureVector { values: out })
    }

    pub fn invert(&self, v: &FeatureVector) -> Result<FeatureVector> {
        ensure_len(self.mean.len())?;
        let mut out = v.values;
        for ((o, m), s) in out.iter_mut().zip(&self.mean).zip(&self.scale) {
            *o = *o * s + m;
        }
        Ok(FeatureVector { values: out })
    }
}

/// `(value - mean) / scale` per feature.
pub fn apply_normalization(v: &FeatureVector, p: &NormalizationParams) -> Result<FeatureVector> {
    p.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::polar;
    use alloc::vec;

    #[test]
    fn every_point_has_one_ring() {
        let r = sqrt(10f64);
        let mut counts = [0; 3];
        for i in [-3.0, -1.0, 1.0, 3.0] {
            for q in [-3.0, -1.0, 1.0, 3.0] {
                let p = Complex::new(i / r, q / r);
                let ring = ring_of(p);
                counts[ring] += 1;
                assert!((p.magnitude() - ring_radius(ring)).abs() < 1e-12);
            }
        }
        assert_eq!(counts, [4, 8, 4]);
    }

    #[test]
    fn rejects_short_and_ringless_frames() {
        let rx = RxOutput {
            symbols: vec![Complex::new(0.3, 0.3); 10],
            cfo_estimate_hz: 0.0,
            agc_gain_db: 0.0,
            noise_var_estimate: 0.0,
        };
        assert!(matches!(
            extract_features(&rx, 2.4e9),
            Err(Error::FrameRejected(_))
        ));
        let rx = RxOutput {
            symbols: vec![Complex::new(0.3, 0.3); 100],
            ..rx
        };
        assert!(matches!(
            extract_features(&rx, 2.4e9),
            Err(Error::FrameRejected(_))
        ));
    }

    #[test]
    fn phase_error_uses_circular_mean() {
        // Alternating +-0.02 rad errors around a 0.1 rad rotation average to 0.1.
        let r = sqrt(10f64);
        let mut symbols = Vec::new();
        for ring_point in [
            Complex::new(1.0 / r, 1.0 / r),
            Complex::new(3.0 / r, 1.0 / r),
            Complex::new(3.0 / r, 3.0 / r),
        ] {
            for k in 0..20 {
                let err = if k % 2 == 0 { 0.02 } else { -0.02 };
                symbols.push(ring_point * polar(1.0, 0.1 + err));
            }
        }
        let rx = RxOutput {
            symbols,
            cfo_estimate_hz: 24.12e3,
            agc_gain_db: 1.5,
            noise_var_estimate: 0.01,
        };
        let v = extract_features(&rx, 2.412e9).unwrap();
        assert!((v.values[0] - 10.0).abs() < 1e-9);
        for ring in 0..3 {
            assert!((v.values[1 + ring] - 1.0).abs() < 1e-12);
            assert!((v.values[4 + ring] - 0.1).abs() < 1e-12);
        }
        assert_eq!(v.values[7], 1.5);
        assert_eq!(v.values[8], 0.01);
    }

    #[test]
    fn normalization_degenerate_and_two_point() {
        let a = FeatureVector::new([3.0; N_FEATURES]);
        let p = fit_normalization(&[a, a]).unwrap();
        assert_eq!(p.mean, vec![3.0; N_FEATURES]);
        assert_eq!(p.scale, vec![SCALE_FLOOR; N_FEATURES]);
        assert_eq!(p.degenerate.len(), N_FEATURES);

        let p = fit_normalization(&[FeatureVector::new([0.0; 9]), FeatureVector::new([2.0; 9])])
            .unwrap();
        assert_eq!(p.mean, vec![1.0; N_FEATURES]);
        assert_eq!(p.scale, vec![1.0; N_FEATURES]);
        assert!(p.degenerate.is_empty());
        assert!(fit_normalization(&[a]).is_err());
    }

    #[test]
    fn normalization_recovers_gaussian_parameters() {
        let mut rng = crate::seed::rng(12);
        let vectors: Vec<FeatureVector> = (0..20_000)
            .map(|_| {
                let mut v = [0.0; N_FEATURES];
                for (i, x) in v.iter_mut().enumerate() {
                    let z: f64 = crate::seed::standard_normal(&mut rng);
                    *x = (i as f64 + 1.0) * 3.0 + (i as f64 + 0.5) * z;
                }
                FeatureVector::new(v)
            })
            .collect();
        let p = fit_normalization(&vectors).unwrap();
        for i in 0..N_FEATURES {
            assert!((p.mean[i] / ((i as f64 + 1.0) * 3.0) - 1.0).abs() < 0.05);
            assert!((p.scale[i] / (i as f64 + 0.5) - 1.0).abs() < 0.05);
        }
        let normalized: Vec<FeatureVector> = vectors.iter().map(|v| p.apply(v).unwrap()).collect();
        let again = fit_normalization(&normalized).unwrap();
        for i in 0..N_FEATURES {
            assert!(again.mean[i].abs() < 1e-9);
            assert!((again.scale[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_and_invert() {
        let p = NormalizationParams {
            mean: vec![1.0; 9],
            scale: vec![2.0; 9],
            degenerate: vec![],
        };
        let m = FeatureVector::new([1.0; 9]);
        assert_eq!(apply_normalization(&m, &p).unwrap().values, [0.0; 9]);
        let v = FeatureVector::new([0.3, -4.0, 1e3, 2.0, 0.0, 5.5, -0.25, 7.0, 1e-6]);
        let back = p.invert(&p.apply(&v).unwrap()).unwrap();
        for (a, b) in v.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let short = NormalizationParams {
            mean: vec![0.0; 3],
            scale: vec![1.0; 3],
            degenerate: vec![],
        };
        assert!(matches!(
            short.apply(&v),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(FeatureVector::from_slice(&[1.0, 2.0]).is_err());
    }
}
