//! Flat attenuation, Doppler shift and AWGN.

#[allow(unused_imports)]
use crate::math::{powf, sqrt};
use alloc::vec::Vec;
use rand::Rng;

use crate::error::ensure;
use crate::seed;
use crate::txmodel::BITS_PER_SYMBOL;
use crate::{Complex, IqFrame, Result};

/// Lowest Eb/N0 a draw may realize; lower draws are clamped here.
pub const EBN0_FLOOR_DB: f64 = -5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelConfig {
    pub ebn0_mean_db: f64,
    pub ebn0_sigma_db: f64,
    pub attenuation_min_db: f64,
    pub attenuation_max_db: f64,
    pub doppler_max_hz: f64,
    pub awgn_enabled: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            ebn0_mean_db: 15.0,
            ebn0_sigma_db: 10.0,
            attenuation_min_db: 0.0,
            attenuation_max_db: 20.0,
            doppler_max_hz: 12.0,
            awgn_enabled: true,
        }
    }
}

impl ChannelConfig {
    /// A channel that passes frames through untouched.
    pub fn transparent() -> Self {
        ChannelConfig {
            ebn0_mean_db: 100.0,
            ebn0_sigma_db: 0.0,
            attenuation_min_db: 0.0,
            attenuation_max_db: 0.0,
            doppler_max_hz: 0.0,
            awgn_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.ebn0_mean_db.is_finite(),
            InvalidConfig,
            "ebn0_mean_db must be finite"
        );
        ensure!(
            self.ebn0_sigma_db >= 0.0 && self.ebn0_sigma_db.is_finite(),
            InvalidConfig,
            "ebn0_sigma_db must be >= 0"
        );
        ensure!(
            self.attenuation_min_db >= 0.0 && self.attenuation_max_db.is_finite(),
            InvalidConfig,
            "attenuation range must be finite and >= 0 dB"
        );
        ensure!(
            self.attenuation_min_db <= self.attenuation_max_db,
            InvalidConfig,
            "attenuation_min_db {} exceeds attenuation_max_db {}",
            self.attenuation_min_db,
            self.attenuation_max_db
        );
        ensure!(
            self.doppler_max_hz >= 0.0 && self.doppler_max_hz.is_finite(),
            InvalidConfig,
            "doppler_max_hz must be >= 0"
        );
        Ok(())
    }
}

/// Channel conditions realized for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelState {
    pub ebn0_db: f64,
    pub attenuation_db: f64,
    pub doppler_hz: f64,
    pub awgn_enabled: bool,
    /// The Eb/N0 draw fell below [`EBN0_FLOOR_DB`] and was clamped.
    pub ebn0_clamped: bool,
}

impl ChannelState {
    pub fn identity() -> Self {
        ChannelState {
            ebn0_db: f64::INFINITY,
            attenuation_db: 0.0,
            doppler_hz: 0.0,
            awgn_enabled: false,
            ebn0_clamped: false,
        }
    }
}

/// Draws Eb/N0 (normal, clamped at the floor), attenuation (uniform) and
/// Doppler (uniform, symmetric), in that order.
pub fn sample_channel(cfg: &ChannelConfig, seed: u64) -> Result<ChannelState> {
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    let z: f64 = seed::standard_normal(&mut rng);
    let raw = cfg.ebn0_mean_db + cfg.ebn0_sigma_db * z;
    let attenuation_db = if cfg.attenuation_max_db > cfg.attenuation_min_db {
        rng.random_range(cfg.attenuation_min_db..=cfg.attenuation_max_db)
    } else {
        cfg.attenuation_min_db
    };
    let doppler_hz = if cfg.doppler_max_hz > 0.0 {
        rng.random_range(-cfg.doppler_max_hz..=cfg.doppler_max_hz)
    } else {
        0.0
    };
    Ok(ChannelState {
        ebn0_db: raw.max(EBN0_FLOOR_DB),
        attenuation_db,
        doppler_hz,
        awgn_enabled: cfg.awgn_enabled,
        ebn0_clamped: raw < EBN0_FLOOR_DB,
    })
}

/// Complex noise variance per sample for a given Eb/N0 and attenuation.
///
/// Unit-energy symbols through the unit-energy RRC carry `1/oversampling`
/// power per sample; the noise density is referenced to that so the matched
/// filter output sees the requested Eb/N0 with 4 bits per symbol.
pub fn noise_variance(ebn0_db: f64, attenuation_db: f64, oversampling: usize) -> f64 {
    let sample_power = powf(10f64, -attenuation_db / 10.0) / oversampling as f64;
    let ebn0 = powf(10f64, ebn0_db / 10.0);
    oversampling as f64 * sample_power / (BITS_PER_SYMBOL as f64 * ebn0)
}

/// Attenuates, Doppler-shifts (sample index 0 at zero phase) and, when
/// enabled, adds complex white Gaussian noise drawn from `seed`.
pub fn apply_channel(frame: &IqFrame, state: &ChannelState, seed: u64) -> Result<IqFrame> {
    frame.validate()?;
    ensure!(
        state.attenuation_db.is_finite() && state.doppler_hz.is_finite() && !state.ebn0_db.is_nan(),
        InvalidInput,
        "channel state must be finite"
    );
    let gain = powf(10f64, -state.attenuation_db / 20.0);
    let mut out = frame.scale(gain);
    if state.doppler_hz != 0.0 {
        out = out.rotate(state.doppler_hz);
    }
    if state.awgn_enabled && state.ebn0_db.is_finite() {
        let sigma =
            sqrt(noise_variance(state.ebn0_db, state.attenuation_db, frame.oversampling) / 2.0);
        let mut rng = seed::rng(seed);
        let noise: Vec<Complex> = (0..out.len())
            .map(|_| {
                let re: f64 = seed::standard_normal(&mut rng);
                let im: f64 = seed::standard_normal(&mut rng);
                Complex::new(re * sigma, im * sigma)
            })
            .collect();
        for (s, n) in out.samples.iter_mut().zip(noise) {
            *s += n;
        }
    }
    Ok(out)
}
