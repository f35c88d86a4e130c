//! One frame end to end: challenge bits through a device, a channel and the
//! receiver, out to a feature vector.

use crate::channel::{apply_channel, ChannelState};
use crate::features::{extract_features, FeatureVector};
use crate::rxchain::{receive, RxConfig, RxOutput};
use crate::txmodel::{
    apply_tx_impairments, generate_prbs, map_bits_to_symbols, pulse_shape, TxProfile,
    BITS_PER_SYMBOL,
};
use crate::{IqFrame, Result};

/// Everything fixed about the link that is not a device or channel draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub symbols_per_frame: usize,
    pub symbol_rate_hz: f64,
    pub carrier_freq_hz: f64,
    pub rx: RxConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            symbols_per_frame: 1024,
            symbol_rate_hz: 1e6,
            carrier_freq_hz: 2.412e9,
            rx: RxConfig::default(),
        }
    }
}

/// The transmitted (impaired) frame for a PRBS seed.
pub fn transmit(profile: &TxProfile, prbs_seed: u64, link: &LinkConfig) -> Result<IqFrame> {
    let bits = generate_prbs(link.symbols_per_frame * BITS_PER_SYMBOL, prbs_seed)?;
    let symbols = map_bits_to_symbols(&bits)?;
    let shaped = pulse_shape(&symbols, &link.rx.rrc, link.symbol_rate_hz)?;
    apply_tx_impairments(&shaped, profile)
}

/// Transmit, propagate and receive one frame.
pub fn simulate_rx(
    profile: &TxProfile,
    prbs_seed: u64,
    channel: &ChannelState,
    noise_seed: u64,
    link: &LinkConfig,
) -> Result<RxOutput> {
    let tx = transmit(profile, prbs_seed, link)?;
    let rx = apply_channel(&tx, channel, noise_seed)?;
    receive(&rx, &link.rx)
}

/// [`simulate_rx`] followed by feature extraction.
pub fn simulate_frame(
    profile: &TxProfile,
    prbs_seed: u64,
    channel: &ChannelState,
    noise_seed: u64,
    link: &LinkConfig,
) -> Result<FeatureVector> {
    let rx = simulate_rx(profile, prbs_seed, channel, noise_seed, link)?;
    extract_features(&rx, link.carrier_freq_hz)
}
