//! Float math routed through `libm`. Free functions rather than methods: when
//! any dependency links `std`, its inherent `f64` methods would shadow a trait
//! and results would change with the feature set of the build.

use num_complex::Complex;

pub(crate) use libm::{
    cos, exp, floor, log as ln, log10, pow as powf, round, sin, sincos, sqrt, tanh,
};

pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Magnitude and phase of a complex sample.
pub(crate) trait Polar {
    fn magnitude(&self) -> f64;
    fn phase(&self) -> f64;
}

impl Polar for Complex<f64> {
    fn magnitude(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
    fn phase(&self) -> f64 {
        libm::atan2(self.im, self.re)
    }
}

pub(crate) fn polar(r: f64, theta: f64) -> Complex<f64> {
    let (s, c) = libm::sincos(theta);
    Complex::new(r * c, r * s)
}
