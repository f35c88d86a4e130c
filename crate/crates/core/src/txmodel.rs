//! Transmitter populations and impaired 16-QAM bursts.
//!
//! A [`TxProfile`] is one PUF instance: the set of analog impairments a
//! particular transmitter was manufactured with. [`sample_population`] plays
//! the role of the manufacturing process; [`apply_tx_impairments`] is what the
//! device does to every frame it sends.

#[allow(unused_imports)]
use crate::math::{polar, powf, sincos, sqrt, Polar};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::ensure;
use crate::frame::convolve;
use crate::seed::{self, Namespace};
use crate::{Complex, IqFrame, Result, RrcParams};

/// Bits carried by one 16-QAM symbol.
pub const BITS_PER_SYMBOL: usize = 4;

/// Gray-coded amplitude levels (before the 1/sqrt(10) scale), indexed by the
/// two-bit value `b_hi b_lo`.
pub const GRAY_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

/// Scale giving unit average symbol energy.
pub fn qam_scale() -> f64 {
    1.0 / sqrt(10.0f64)
}

/// Statistical spread of the manufacturing process.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VariationConfig {
    pub carrier_freq_hz: f64,
    pub cfo_sigma_hz: f64,
    pub gain_imbalance_sigma_db: f64,
    pub phase_imbalance_sigma_deg: f64,
    pub dc_offset_sigma: f64,
    pub pa_sat_nominal: f64,
    pub pa_sat_sigma: f64,
    pub pa_smoothness: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            carrier_freq_hz: 2.412e9,
            // 25 ppm of 2.412 GHz taken as a 3-sigma bound
            cfo_sigma_hz: 20.1e3,
            gain_imbalance_sigma_db: 0.5,
            phase_imbalance_sigma_deg: 1.0,
            dc_offset_sigma: 0.01,
            pa_sat_nominal: 2.0,
            pa_sat_sigma: 0.1,
            pa_smoothness: 2.0,
        }
    }
}

impl VariationConfig {
    /// All sigmas zero: every sampled device is the nominal device.
    pub fn zero_variance(self) -> Self {
        VariationConfig {
            cfo_sigma_hz: 0.0,
            gain_imbalance_sigma_db: 0.0,
            phase_imbalance_sigma_deg: 0.0,
            dc_offset_sigma: 0.0,
            pa_sat_sigma: 0.0,
            ..self
        }
    }

    /// Every sigma multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        VariationConfig {
            cfo_sigma_hz: self.cfo_sigma_hz * factor,
            gain_imbalance_sigma_db: self.gain_imbalance_sigma_db * factor,
            phase_imbalance_sigma_deg: self.phase_imbalance_sigma_deg * factor,
            dc_offset_sigma: self.dc_offset_sigma * factor,
            pa_sat_sigma: self.pa_sat_sigma * factor,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("cfo_sigma_hz", self.cfo_sigma_hz),
            ("gain_imbalance_sigma_db", self.gain_imbalance_sigma_db),
            ("phase_imbalance_sigma_deg", self.phase_imbalance_sigma_deg),
            ("dc_offset_sigma", self.dc_offset_sigma),
            ("pa_sat_sigma", self.pa_sat_sigma),
        ];
        for (name, v) in sigmas {
            ensure!(
                v >= 0.0 && v.is_finite(),
                InvalidConfig,
                "{} must be >= 0, got {}",
                name,
                v
            );
        }
        ensure!(
            self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite(),
            InvalidConfig,
            "carrier_freq_hz must be > 0"
        );
        ensure!(
            self.pa_sat_nominal > 0.0 && self.pa_sat_nominal.is_finite(),
            InvalidConfig,
            "pa_sat_nominal must be > 0"
        );
        ensure!(
            self.pa_smoothness > 0.0 && self.pa_smoothness.is_finite(),
            InvalidConfig,
            "pa_smoothness must be > 0"
        );
        Ok(())
    }
}

/// One transmitter's impairments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TxProfile {
    pub device_id: usize,
    pub cfo_hz: f64,
    pub gain_i: f64,
    pub gain_q: f64,
    pub phase_imbalance_rad: f64,
    pub dc_i: f64,
    pub dc_q: f64,
    pub pa_sat: f64,
    pub pa_smoothness: f64,
}

impl TxProfile {
    /// The impairment-free device: unit gains, no skew, no DC, no CFO and a
    /// PA that never compresses.
    pub fn ideal(device_id: usize) -> Self {
        TxProfile {
            device_id,
            cfo_hz: 0.0,
            gain_i: 1.0,
            gain_q: 1.0,
            phase_imbalance_rad: 0.0,
            dc_i: 0.0,
            dc_q: 0.0,
            pa_sat: f64::INFINITY,
            pa_smoothness: 2.0,
        }
    }
}

/// Draws `n` transmitters. Device `i` uses its own derived stream, so the
/// first `m` devices of a population of `n > m` equal a population of `m`.
pub fn sample_population(n: usize, cfg: &VariationConfig, seed: u64) -> Result<Vec<TxProfile>> {
    ensure!(n >= 1, InvalidInput, "population size must be >= 1");
    cfg.validate()?;
    let profiles = (0..n)
        .map(|device_id| {
            let mut rng = seed::rng(seed::mix(seed, Namespace::Population, device_id as u64, 0));
            let mut normal = || -> f64 { seed::standard_normal(&mut rng) };
            let cfo_hz = cfg.cfo_sigma_hz * normal();
            // Imbalance split symmetrically across the rails.
            let imbalance_db = cfg.gain_imbalance_sigma_db * normal();
            let phase_imbalance_rad = (cfg.phase_imbalance_sigma_deg * normal()).to_radians();
            let dc_i = cfg.dc_offset_sigma * normal();
            let dc_q = cfg.dc_offset_sigma * normal();
            let pa_sat =
                (cfg.pa_sat_nominal + cfg.pa_sat_sigma * normal()).max(1e-3 * cfg.pa_sat_nominal);
            TxProfile {
                device_id,
                cfo_hz,
                gain_i: powf(10f64, imbalance_db / 40.0),
                gain_q: powf(10f64, -imbalance_db / 40.0),
                phase_imbalance_rad,
                dc_i,
                dc_q,
                pa_sat,
                pa_smoothness: cfg.pa_smoothness,
            }
        })
        .collect();
    Ok(profiles)
}

/// Challenge bits and the PRBS seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub bits: Vec<u8>,
    pub seed: u64,
}

impl BitStream {
    pub fn new(bits: Vec<u8>, seed: u64) -> Result<Self> {
        ensure!(
            bits.len().is_multiple_of(BITS_PER_SYMBOL),
            InvalidInput,
            "bit count {} is not a multiple of {}",
            bits.len(),
            BITS_PER_SYMBOL
        );
        ensure!(
            bits.iter().all(|b| *b <= 1),
            InvalidInput,
            "bits must be 0 or 1"
        );
        Ok(BitStream { bits, seed })
    }
}

/// PRBS-15 initial state for a seed: the seed folded to 15 bits. The all-zero
/// state (which would lock the register) is replaced by `0x0001`.
pub fn prbs15_state(seed: u64) -> u16 {
    let folded = seed ^ (seed >> 15) ^ (seed >> 30) ^ (seed >> 45) ^ (seed >> 60);
    match (folded & 0x7fff) as u16 {
        0 => 1,
        s => s,
    }
}

/// Maximal-length PRBS-15 (x^15 + x^14 + 1), Fibonacci form.
pub fn generate_prbs(n_bits: usize, seed: u64) -> Result<BitStream> {
    ensure!(
        n_bits >= BITS_PER_SYMBOL && n_bits.is_multiple_of(BITS_PER_SYMBOL),
        InvalidInput,
        "n_bits must be a positive multiple of 4, got {}",
        n_bits
    );
    let mut state = prbs15_state(seed);
    let bits = (0..n_bits)
        .map(|_| {
            let bit = ((state >> 14) ^ (state >> 13)) & 1;
            state = ((state << 1) | bit) & 0x7fff;
            bit as u8
        })
        .collect();
    Ok(BitStream { bits, seed })
}

/// Gray-mapped 16-QAM with unit average energy. Bits `b3 b2` select I and
/// `b1 b0` select Q.
pub fn map_bits_to_symbols(bits: &BitStream) -> Result<Vec<Complex>> {
    ensure!(
        bits.bits.len().is_multiple_of(BITS_PER_SYMBOL),
        InvalidInput,
        "bit count {} is not a multiple of 4",
        bits.bits.len()
    );
    let scale = qam_scale();
    Ok(bits
        .bits
        .chunks_exact(BITS_PER_SYMBOL)
        .map(|b| {
            let i = GRAY_LEVELS[((b[0] << 1) | b[1]) as usize];
            let q = GRAY_LEVELS[((b[2] << 1) | b[3]) as usize];
            Complex::new(i * scale, q * scale)
        })
        .collect())
}

/// Zero-stuffs symbols by `p.oversampling` and filters with the unit-energy
/// RRC. Output length is `(n_symbols + span) * oversampling`.
pub fn pulse_shape(symbols: &[Complex], p: &RrcParams, symbol_rate_hz: f64) -> Result<IqFrame> {
    ensure!(!symbols.is_empty(), InvalidInput, "no symbols to shape");
    let taps = p.taps()?;
    let mut upsampled = alloc::vec![Complex::new(0.0, 0.0); symbols.len() * p.oversampling];
    for (k, s) in symbols.iter().enumerate() {
        upsampled[k * p.oversampling] = *s;
    }
    let samples = convolve(&upsampled, &taps);
    debug_assert_eq!(
        samples.len(),
        (symbols.len() + p.span_symbols) * p.oversampling
    );
    let mut frame = IqFrame::new(samples, symbol_rate_hz, p.oversampling)?;
    frame.group_delay = p.filter_delay();
    Ok(frame)
}

/// Rapp AM/AM: `|v| / (1 + (|v|/sat)^(2p))^(1/(2p))`. Phase is untouched.
pub fn rapp_magnitude(magnitude: f64, pa_sat: f64, smoothness: f64) -> f64 {
    if pa_sat.is_infinite() {
        return magnitude;
    }
    let two_p = 2.0 * smoothness;
    magnitude / powf(1.0 + powf(magnitude / pa_sat, two_p), 1.0 / two_p)
}

/// Applies the device's impairments in the fixed order: I/Q imbalance and DC,
/// then PA compression, then LO offset rotation.
///
/// DC offsets and `pa_sat` are in constellation units. A unit-energy pulse
/// spreads each symbol over `oversampling` samples, so one constellation unit
/// corresponds to a waveform amplitude of `1/sqrt(oversampling)`.
pub fn apply_tx_impairments(frame: &IqFrame, profile: &TxProfile) -> Result<IqFrame> {
    frame.validate()?;
    ensure!(
        profile.gain_i > 0.0 && profile.gain_q > 0.0 && profile.pa_sat > 0.0,
        InvalidInput,
        "profile gains and pa_sat must be positive"
    );
    let unit = 1.0 / sqrt(frame.oversampling as f64);
    let (dc_i, dc_q, pa_sat) = (
        profile.dc_i * unit,
        profile.dc_q * unit,
        profile.pa_sat * unit,
    );
    let (sin_phi, cos_phi) = sincos(profile.phase_imbalance_rad);
    let step = 2.0 * PI * profile.cfo_hz / frame.sample_rate_hz;
    let samples = frame
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let i = profile.gain_i * s.re + dc_i;
            let q = profile.gain_q * (s.im * cos_phi + s.re * sin_phi) + dc_q;
            let v = Complex::new(i, q);
            let mag = v.magnitude();
            let v = if mag > 0.0 {
                v * (rapp_magnitude(mag, pa_sat, profile.pa_smoothness) / mag)
            } else {
                v
            };
            v * polar(1.0, step * k as f64)
        })
        .collect();
    Ok(frame.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, powi, round, sin};
    use alloc::vec;

    fn frame_of(samples: Vec<Complex>) -> IqFrame {
        IqFrame::new(samples, 1e6, 8).unwrap()
    }

    #[test]
    fn zero_variance_population_is_nominal() {
        let cfg = VariationConfig::default().zero_variance();
        let pop = sample_population(5, &cfg, 99).unwrap();
        assert_eq!(pop.len(), 5);
        for (i, p) in pop.iter().enumerate() {
            assert_eq!(p.device_id, i);
            assert_eq!(p.cfo_hz, 0.0);
            assert_eq!(p.gain_i, 1.0);
            assert_eq!(p.gain_q, 1.0);
            assert_eq!(p.phase_imbalance_rad, 0.0);
            assert_eq!(p.dc_i, 0.0);
            assert_eq!(p.dc_q, 0.0);
            assert_eq!(p.pa_sat, cfg.pa_sat_nominal);
        }
    }

    #[test]
    fn cfo_statistics_match_config() {
        let cfg = VariationConfig::default();
        let pop = sample_population(10_000, &cfg, 2024).unwrap();
        let n = pop.len() as f64;
        let mean = pop.iter().map(|p| p.cfo_hz).sum::<f64>() / n;
        let var = pop.iter().map(|p| powi(p.cfo_hz - mean, 2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e3, "mean {mean}");
        assert!((sqrt(var) / 20.1e3 - 1.0).abs() < 0.05, "std {}", sqrt(var));
    }

    #[test]
    fn twenty_five_ppm_is_three_sigma() {
        let cfg = VariationConfig::default();
        let bound = 25e-6 * cfg.carrier_freq_hz;
        assert!((bound - 60.3e3).abs() < 1.0);
        assert!((bound / cfg.cfo_sigma_hz - 3.0).abs() < 0.001);
    }

    #[test]
    fn population_rejects_bad_input() {
        assert!(sample_population(0, &VariationConfig::default(), 1).is_err());
        let bad = VariationConfig {
            cfo_sigma_hz: -1.0,
            ..Default::default()
        };
        assert!(sample_population(3, &bad, 1).is_err());
        let bad = VariationConfig {
            pa_smoothness: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn population_prefix_is_stable() {
        let cfg = VariationConfig::default();
        let small = sample_population(4, &cfg, 5).unwrap();
        let large = sample_population(9, &cfg, 5).unwrap();
        assert_eq!(&small[..], &large[..4]);
    }

    #[test]
    fn prbs_full_period_balance() {
        let period = (1 << 15) - 1;
        // Pad to a multiple of 4 and inspect the first period only.
        let s = generate_prbs(period + 1, 17).unwrap();
        let ones = s.bits[..period].iter().filter(|b| **b == 1).count();
        assert_eq!(ones, 16384);
        assert_eq!(period - ones, 16383);
        // The register returns to its start state after exactly one period.
        let again = generate_prbs(2 * period + 2, 17).unwrap();
        assert_eq!(&again.bits[..period], &again.bits[period..2 * period]);
    }

    #[test]
    fn prbs_period_is_maximal() {
        // Brute-force enumeration of register states from one seed.
        let mut state = prbs15_state(3);
        let start = state;
        let mut steps = 0u32;
        loop {
            let bit = ((state >> 14) ^ (state >> 13)) & 1;
            state = ((state << 1) | bit) & 0x7fff;
            steps += 1;
            if state == start {
                break;
            }
        }
        assert_eq!(steps, 32767);
    }

    #[test]
    fn prbs_determinism_and_seed_distance() {
        let a = generate_prbs(4096, 1).unwrap();
        assert_eq!(a, generate_prbs(4096, 1).unwrap());
        let b = generate_prbs(4096, 0xdead_beef).unwrap();
        let hamming = a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count() as f64;
        assert!((hamming / 2048.0 - 1.0).abs() < 0.1, "hamming {hamming}");
    }

    #[test]
    fn prbs_zero_seed_is_remapped() {
        assert_eq!(prbs15_state(0), 1);
        let s = generate_prbs(64, 0).unwrap();
        assert!(s.bits.contains(&1));
        assert!(generate_prbs(6, 1).is_err());
        assert!(generate_prbs(0, 1).is_err());
    }

    #[test]
    fn mapping_table() {
        let s = map_bits_to_symbols(&BitStream::new(vec![0, 0, 0, 0], 0).unwrap()).unwrap();
        let r = sqrt(10f64);
        assert!((s[0] - Complex::new(-3.0 / r, -3.0 / r)).magnitude() < 1e-15);
        let mut points = Vec::new();
        for v in 0u8..16 {
            let bits = vec![(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1];
            let s = map_bits_to_symbols(&BitStream::new(bits, 0).unwrap()).unwrap()[0];
            let (i, q) = (s.re * r, s.im * r);
            assert!([-3.0, -1.0, 1.0, 3.0].iter().any(|l| (l - i).abs() < 1e-12));
            assert!([-3.0, -1.0, 1.0, 3.0].iter().any(|l| (l - q).abs() < 1e-12));
            points.push(((round(i) as i32), (round(q) as i32)));
        }
        points.sort();
        points.dedup();
        assert_eq!(points.len(), 16);
        assert!(BitStream::new(vec![0, 1, 1], 0).is_err());
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        // Adjacent levels along one axis differ in exactly one of the two bits.
        let order = [0b00u8, 0b01, 0b11, 0b10];
        for w in order.windows(2) {
            assert_eq!((w[0] ^ w[1]).count_ones(), 1);
            assert!(GRAY_LEVELS[w[0] as usize] < GRAY_LEVELS[w[1] as usize]);
        }
    }

    #[test]
    fn mean_symbol_energy_is_unity() {
        let bits = generate_prbs(400_000, 11).unwrap();
        let s = map_bits_to_symbols(&bits).unwrap();
        let e = s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((e - 1.0).abs() < 0.01, "energy {e}");
    }

    #[test]
    fn impulse_shapes_to_taps() {
        let p = RrcParams::default();
        let f = pulse_shape(&[Complex::new(1.0, 0.0)], &p, 1e6).unwrap();
        let taps = p.taps().unwrap();
        assert_eq!(f.len(), (1 + p.span_symbols) * p.oversampling);
        assert_eq!(f.group_delay, 88);
        for (a, t) in f.samples.iter().zip(&taps) {
            assert!((a.re - t).abs() < 1e-15 && a.im == 0.0);
        }
        assert!(f.samples[taps.len()..].iter().all(|s| s.magnitude() == 0.0));
        assert!(pulse_shape(&[], &p, 1e6).is_err());
    }

    #[test]
    fn identity_profile_is_transparent() {
        let f = frame_of(
            (0..200)
                .map(|k| Complex::new(sin(k as f64), cos(k as f64)))
                .collect(),
        );
        let out = apply_tx_impairments(&f, &TxProfile::ideal(0)).unwrap();
        for (a, b) in f.samples.iter().zip(&out.samples) {
            assert!((a - b).magnitude() < 1e-9);
        }
    }

    #[test]
    fn cfo_rotates_analytically() {
        let f = frame_of(
            (0..100)
                .map(|k| Complex::new(1.0 + k as f64 * 0.01, -0.5))
                .collect(),
        );
        let profile = TxProfile {
            cfo_hz: 1000.0,
            ..TxProfile::ideal(0)
        };
        let out = apply_tx_impairments(&f, &profile).unwrap();
        for (k, (a, b)) in f.samples.iter().zip(&out.samples).enumerate() {
            let expect = a * polar(1.0, 2.0 * PI * 1000.0 * k as f64 / 8e6);
            assert!((expect - b).magnitude() < 1e-12);
        }
    }

    #[test]
    fn outer_ring_compresses_more() {
        let outer = 3.0 * sqrt(2f64) / sqrt(10f64);
        let inner = sqrt(2f64) / sqrt(10f64);
        let ratio = |m: f64| rapp_magnitude(m, 1.0, 2.0) / m;
        assert!(ratio(outer) < ratio(inner));
        assert!(ratio(inner) < 1.0);
    }

    #[test]
    fn imbalance_formula() {
        let f = frame_of(vec![Complex::new(0.3, -0.2); 4]);
        let profile = TxProfile {
            gain_i: 1.1,
            gain_q: 0.9,
            phase_imbalance_rad: 0.05,
            dc_i: 0.01,
            dc_q: -0.02,
            ..TxProfile::ideal(0)
        };
        let out = apply_tx_impairments(&f, &profile).unwrap();
        // frame_of uses 8 samples per symbol
        let unit = 1.0 / sqrt(8f64);
        let i = 1.1 * 0.3 + 0.01 * unit;
        let q = 0.9 * (-0.2 * cos(0.05f64) + 0.3 * sin(0.05f64)) - 0.02 * unit;
        assert!((out.samples[0] - Complex::new(i, q)).magnitude() < 1e-15);
    }

    #[test]
    fn zero_variance_devices_emit_identical_frames() {
        let cfg = VariationConfig::default().zero_variance();
        let pop = sample_population(2, &cfg, 8).unwrap();
        let bits = generate_prbs(256, 4).unwrap();
        let f = pulse_shape(
            &map_bits_to_symbols(&bits).unwrap(),
            &RrcParams::default(),
            1e6,
        )
        .unwrap();
        let a = apply_tx_impairments(&f, &pop[0]).unwrap();
        let b = apply_tx_impairments(&f, &pop[1]).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    proptest::proptest! {
        #[test]
        fn rapp_is_monotone_and_bounded(r in 0.0f64..4.0, d in 1e-4f64..1.0, sat in 0.1f64..5.0, p in 0.5f64..5.0) {
            // Beyond a few multiples of saturation the output is flat to f64 precision.
            let a = r * sat;
            let lo = rapp_magnitude(a, sat, p);
            let hi = rapp_magnitude(a + d * sat, sat, p);
            proptest::prop_assert!(hi > lo);
            proptest::prop_assert!(hi <= sat);
        }
    }
}
