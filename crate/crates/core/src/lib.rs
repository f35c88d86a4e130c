//! Simulation core for RF-PUF: identifying wireless transmitters from the
//! analog impairments they cannot help but imprint on their signal.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. Every random
//! draw goes through an explicit seed, so a frame, a population or a trained
//! model is a pure function of its inputs.
//!
//! Signal path, one frame at a time:
//!
//! ```text
//! txmodel (PRBS -> 16-QAM -> RRC -> I/Q imbalance -> PA -> CFO)
//!   -> channel (attenuation, Doppler, AWGN)
//!   -> rxchain (matched filter, AGC, blind CFO estimate/correct, sampling)
//!   -> features (9-element response vector)
//!   -> ann (MLP classifier) / pufmetrics (distances, false detection)
//! ```

#![no_std]
// Index loops over matrices read more clearly than zipped iterators here.
#![allow(clippy::needless_range_loop)]
// `!(x >= lo)` style checks reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ann;
pub mod channel;
mod error;
pub mod features;
pub mod frame;
mod math;
pub mod pipeline;
pub mod pufmetrics;
pub mod rxchain;
pub mod seed;
pub mod spectrum;
pub mod txmodel;

pub use error::{Error, Result};
pub use frame::{IqFrame, RrcParams};

/// Complex baseband sample type used throughout.
pub type Complex = num_complex::Complex64;
