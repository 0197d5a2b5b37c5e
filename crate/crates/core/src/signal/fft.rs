//! FFT helpers on top of `rustfft`.
//!
//! Conventions: `forward` is `X_k = Σ x_n e^{-j2πkn/N}` (unnormalized) and
//! `inverse` carries the `1/N`, so `inverse(forward(x)) == x`. Angular
//! frequencies follow the FFT bin order, negative half last.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::num::Real;

/// Planned forward/inverse transform pair of a fixed length with its scratch.
pub struct FftPair<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    len: usize,
}

impl<T: Real> FftPair<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            fwd,
            inv,
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "FFT length mismatch");
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// Normalized inverse transform.
    pub fn inverse(&mut self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "FFT length mismatch");
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let k = T::one() / T::from_usize(self.len).unwrap();
        for v in buf.iter_mut() {
            *v = *v * k;
        }
    }

    /// `x ← IFFT(H · FFT(x))` with `h` given in bin order.
    pub fn filter(&mut self, buf: &mut [Complex<T>], h: &[Complex<T>]) {
        assert_eq!(h.len(), self.len);
        self.forward(buf);
        for (v, g) in buf.iter_mut().zip(h) {
            *v = *v * *g;
        }
        self.inverse(buf);
    }

    /// Like [`filter`](Self::filter) with a real-valued response.
    pub fn filter_real(&mut self, buf: &mut [Complex<T>], h: &[T]) {
        assert_eq!(h.len(), self.len);
        self.forward(buf);
        for (v, g) in buf.iter_mut().zip(h) {
            *v = *v * *g;
        }
        self.inverse(buf);
    }
}

pub fn fft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    FftPair::new(x.len()).forward(&mut buf);
    buf
}

pub fn ifft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    FftPair::new(x.len()).inverse(&mut buf);
    buf
}

/// Frequency in Hz of bin `k` for an `n`-point transform at `sample_rate`.
#[inline]
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    k * sample_rate / n as f64
}

/// Bin frequencies in Hz, FFT order.
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n).map(|k| bin_frequency(k, n, sample_rate)).collect()
}

/// Angular bin frequencies in rad/s, FFT order.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|k| two_pi * bin_frequency(k, n, sample_rate))
        .collect()
}

/// Index of the largest-magnitude bin.
pub fn peak_bin<T: Real>(spectrum: &[Complex<T>]) -> usize {
    spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}
