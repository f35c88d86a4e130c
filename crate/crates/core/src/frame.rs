//! Sample frames and the root-raised-cosine pulse.

#[allow(unused_imports)]
use crate::math::{cos, exp, polar, sin, sqrt};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::ensure;
use crate::{Complex, Result};

/// Complex baseband samples plus the rate metadata needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex>,
    pub sample_rate_hz: f64,
    pub symbol_rate_hz: f64,
    pub oversampling: usize,
    /// Samples between a symbol's insertion point and its peak after all
    /// filtering applied so far. Symbol `k` peaks at `group_delay + k * oversampling`.
    pub group_delay: usize,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex>, symbol_rate_hz: f64, oversampling: usize) -> Result<Self> {
        let frame = IqFrame {
            samples,
            sample_rate_hz: symbol_rate_hz * oversampling as f64,
            symbol_rate_hz,
            oversampling,
            group_delay: 0,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.samples.is_empty(),
            InvalidInput,
            "frame has no samples"
        );
        ensure!(
            self.oversampling >= 1,
            InvalidInput,
            "oversampling must be a positive integer"
        );
        ensure!(
            self.symbol_rate_hz > 0.0 && self.symbol_rate_hz.is_finite(),
            InvalidInput,
            "symbol rate must be positive"
        );
        let expected = self.symbol_rate_hz * self.oversampling as f64;
        ensure!(
            (self.sample_rate_hz - expected).abs() <= 1e-9 * expected,
            InvalidInput,
            "sample rate {} is not oversampling x symbol rate ({})",
            self.sample_rate_hz,
            expected
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x|^2 over all samples.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Symbols represented by the frame, inferred from its length and delay.
    pub fn symbol_count(&self) -> usize {
        self.samples.len().saturating_sub(2 * self.group_delay) / self.oversampling
    }

    pub(crate) fn with_samples(&self, samples: Vec<Complex>) -> IqFrame {
        IqFrame {
            samples,
            ..self.clone()
        }
    }

    /// Multiplies sample `k` by `exp(j 2 pi offset_hz k / fs)`.
    pub fn rotate(&self, offset_hz: f64) -> IqFrame {
        let step = 2.0 * PI * offset_hz / self.sample_rate_hz;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| s * polar(1.0, step * k as f64))
            .collect();
        self.with_samples(samples)
    }

    pub fn scale(&self, gain: f64) -> IqFrame {
        self.with_samples(self.samples.iter().map(|s| s * gain).collect())
    }
}

/// Root-raised-cosine filter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RrcParams {
    pub rolloff: f64,
    pub span_symbols: usize,
    pub oversampling: usize,
}

/// Span 22 is the shortest even span whose truncated Tx/Rx cascade keeps
/// every off-peak symbol-instant tap below 1e-3 of the main tap at rolloff 0.35.
impl Default for RrcParams {
    fn default() -> Self {
        RrcParams {
            rolloff: 0.35,
            span_symbols: 22,
            oversampling: 8,
        }
    }
}

impl RrcParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.rolloff),
            InvalidConfig,
            "rolloff {} outside [0, 1]",
            self.rolloff
        );
        ensure!(
            self.span_symbols >= 4 && self.span_symbols.is_multiple_of(2),
            InvalidConfig,
            "span_symbols must be an even integer >= 4, got {}",
            self.span_symbols
        );
        ensure!(
            self.oversampling >= 1,
            InvalidConfig,
            "oversampling must be >= 1"
        );
        Ok(())
    }

    pub fn num_taps(&self) -> usize {
        self.span_symbols * self.oversampling + 1
    }

    /// Delay of one filter, in samples.
    pub fn filter_delay(&self) -> usize {
        self.span_symbols * self.oversampling / 2
    }

    /// Unit-energy taps (sum of squares is one).
    pub fn taps(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let half = self.filter_delay() as isize;
        let mut taps: Vec<f64> = (-half..=half)
            .map(|n| rrc_pulse(n as f64 / self.oversampling as f64, self.rolloff))
            .collect();
        let energy = sqrt(taps.iter().map(|t| t * t).sum::<f64>());
        taps.iter_mut().for_each(|t| *t /= energy);
        Ok(taps)
    }
}

/// Continuous RRC impulse response for unit symbol period, at time `t` in
/// symbols. Unit energy over the real line.
pub fn rrc_pulse(t: f64, beta: f64) -> f64 {
    const EPS: f64 = 1e-9;
    if t.abs() < EPS {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < EPS {
        let a = PI / (4.0 * beta);
        return beta / sqrt(2.0f64) * ((1.0 + 2.0 / PI) * sin(a) + (1.0 - 2.0 / PI) * cos(a));
    }
    let num = sin(PI * t * (1.0 - beta)) + 4.0 * beta * t * cos(PI * t * (1.0 + beta));
    let den = PI * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    num / den
}

/// Full linear convolution of a complex signal with real taps.
pub fn convolve(signal: &[Complex], taps: &[f64]) -> Vec<Complex> {
    if signal.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    let mut out = alloc::vec![Complex::new(0.0, 0.0); signal.len() + taps.len() - 1];
    for (i, s) in signal.iter().enumerate() {
        if s.re == 0.0 && s.im == 0.0 {
            continue;
        }
        for (j, t) in taps.iter().enumerate() {
            out[i + j] += s * *t;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{powi, Polar};

    #[test]
    fn rejects_bad_params() {
        assert!(RrcParams {
            rolloff: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RrcParams {
            span_symbols: 2,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RrcParams {
            span_symbols: 7,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RrcParams::default().validate().is_ok());
    }

    #[test]
    fn taps_have_unit_energy() {
        for rolloff in [0.0, 0.2, 0.35, 0.5, 1.0] {
            let p = RrcParams {
                rolloff,
                ..Default::default()
            };
            let taps = p.taps().unwrap();
            assert_eq!(taps.len(), 177);
            let e: f64 = taps.iter().map(|t| t * t).sum();
            assert!((e - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn raw_tap_energy_matches_quadrature_of_pulse() {
        // Midpoint-rule integral of the continuous pulse over the span agrees
        // with the oversampled Riemann sum of the tap formula.
        let p = RrcParams {
            rolloff: 0.35,
            span_symbols: 10,
            oversampling: 8,
        };
        let half = (p.span_symbols / 2) as f64;
        let steps = 200_000;
        let dt = 2.0 * half / steps as f64;
        let integral: f64 = (0..steps)
            .map(|i| {
                let t = -half + (i as f64 + 0.5) * dt;
                powi(rrc_pulse(t, p.rolloff), 2) * dt
            })
            .sum();
        let riemann: f64 = (-40..=40)
            .map(|n| powi(rrc_pulse(n as f64 / 8.0, p.rolloff), 2) / 8.0)
            .sum();
        assert!((integral - riemann).abs() < 1e-3, "{integral} vs {riemann}");
        // Truncation to 10 symbols keeps nearly all of the unit energy.
        assert!((integral - 1.0).abs() < 5e-3);
    }

    #[test]
    fn pulse_is_continuous_at_singular_points() {
        let beta = 0.25;
        let t0 = 1.0 / (4.0 * beta);
        let at = rrc_pulse(t0, beta);
        let near = rrc_pulse(t0 + 1e-6, beta);
        assert!((at - near).abs() < 1e-4);
        assert!((rrc_pulse(1e-7, beta) - rrc_pulse(0.0, beta)).abs() < 1e-4);
    }

    #[test]
    fn rotate_then_inverse_is_identity() {
        let samples = (0..64)
            .map(|k| Complex::new(k as f64, -(k as f64) / 2.0))
            .collect();
        let f = IqFrame::new(samples, 1e6, 8).unwrap();
        let back = f.rotate(1234.5).rotate(-1234.5);
        for (a, b) in f.samples.iter().zip(&back.samples) {
            assert!((a - b).magnitude() < 1e-12 * (1.0 + a.magnitude()));
        }
    }
}
