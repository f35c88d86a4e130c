//! Radix-2 FFT and Welch-averaged periodogram.

#[allow(unused_imports)]
use crate::math::{cos, exp, polar};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::ensure;
use crate::{Complex, Result};

/// In-place forward DFT, `X[k] = sum x[n] exp(-j 2 pi k n / N)`.
/// `buf.len()` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = polar(1.0, step * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Welch power spectrum: Hann-windowed segments of `segment_len` samples with
/// 50% overlap, periodograms averaged. Bin `k` is frequency `k * fs / N`
/// (upper half wraps to negative frequencies). Returns the averaged spectrum
/// and the number of segments used.
pub fn welch_psd(x: &[Complex], segment_len: usize) -> Result<(Vec<f64>, usize)> {
    ensure!(
        segment_len >= 4 && segment_len.is_power_of_two(),
        InvalidInput,
        "segment length {} must be a power of two >= 4",
        segment_len
    );
    ensure!(
        x.len() >= segment_len,
        InvalidInput,
        "{} samples is shorter than one {}-sample segment",
        x.len(),
        segment_len
    );
    let window = hann(segment_len);
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let hop = segment_len / 2;
    let mut psd = alloc::vec![0.0; segment_len];
    let mut buf = alloc::vec![Complex::new(0.0, 0.0); segment_len];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= x.len() {
        for (b, (s, w)) in buf
            .iter_mut()
            .zip(x[start..start + segment_len].iter().zip(&window))
        {
            *b = s * *w;
        }
        fft_in_place(&mut buf);
        for (p, b) in psd.iter_mut().zip(&buf) {
            *p += b.norm_sqr() / norm;
        }
        segments += 1;
        start += hop;
    }
    psd.iter_mut().for_each(|p| *p /= segments as f64);
    Ok((psd, segments))
}
