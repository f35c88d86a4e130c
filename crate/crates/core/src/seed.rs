//! Seed derivation. Every random stream in a run is reached from the master
//! seed through [`mix`], keyed by a namespace tag and an item index pair, so
//! serial and parallel generation draw identical numbers.

use rand::{Rng, SeedableRng};

use crate::math::{cos, ln, sqrt};
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used for all draws.
pub type SimRng = ChaCha8Rng;

/// Namespace tags that keep unrelated draws from sharing a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Namespace {
    Population = 1,
    TrainPrbs = 2,
    TrainChannel = 3,
    EvalPrbs = 4,
    EvalChannel = 5,
    ModelInit = 6,
    Shuffle = 7,
    TrainNoise = 8,
    EvalNoise = 9,
    /// The shared challenge bit-stream replayed for PUF distance reports.
    Challenge = 10,
    ChallengeChannel = 11,
    ChallengeNoise = 12,
}

impl Namespace {
    pub const ALL: [Namespace; 12] = [
        Namespace::Population,
        Namespace::TrainPrbs,
        Namespace::TrainChannel,
        Namespace::EvalPrbs,
        Namespace::EvalChannel,
        Namespace::ModelInit,
        Namespace::Shuffle,
        Namespace::TrainNoise,
        Namespace::EvalNoise,
        Namespace::Challenge,
        Namespace::ChallengeChannel,
        Namespace::ChallengeNoise,
    ];
}

// splitmix64 finalizer
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `mix(master_seed, namespace, device_id, frame_index)`.
pub fn mix(master: u64, namespace: Namespace, device_id: u64, frame_index: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = avalanche(master.wrapping_add(GOLDEN));
    for word in [namespace as u64, device_id, frame_index] {
        h = avalanche(
            h ^ word
                .wrapping_add(GOLDEN)
                .wrapping_add(h << 6)
                .wrapping_add(h >> 2),
        );
    }
    h
}

/// Generator for a single derived seed.
pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One standard normal draw (Box-Muller, two uniforms per call), computed with
/// `libm` so the value does not depend on the build's float backend.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    sqrt(-2.0 * ln(u1)) * cos(core::f64::consts::TAU * u2)
}
