//! Sample-rate conversion for periodic (circularly extended) waveforms.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};
use crate::signal::waveform::ComplexWaveform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    /// Keys cubic convolution (a = −0.5); an ideal low-pass at the new
    /// Nyquist frequency precedes decimation.
    #[default]
    Cubic,
    /// Spectral zero-padding or truncation.
    Fft,
}

/// Output length for a rate change, rounded to the nearest sample.
pub fn resampled_len(len: usize, rate: f64, new_rate: f64) -> usize {
    ((len as f64) * new_rate / rate).round().max(1.0) as usize
}

pub fn resample<T: Real>(
    w: &ComplexWaveform<T>,
    new_rate: f64,
    method: ResampleMethod,
) -> Result<ComplexWaveform<T>> {
    if !(new_rate > 0.0) || !new_rate.is_finite() {
        return Err(invalid("new_rate", format!("{new_rate} must be positive")));
    }
    if new_rate == w.sample_rate() {
        return Ok(w.clone());
    }
    let m = resampled_len(w.len(), w.sample_rate(), new_rate);
    let out = match method {
        ResampleMethod::Fft => fft_resample(w.samples(), m),
        ResampleMethod::Cubic => {
            let ratio = w.sample_rate() / new_rate;
            if new_rate < w.sample_rate() {
                let mut x = w.samples().to_vec();
                lowpass(&mut x, w.sample_rate(), 0.5 * new_rate);
                cubic_resample(&x, m, ratio)
            } else {
                cubic_resample(w.samples(), m, ratio)
            }
        }
    };
    Ok(ComplexWaveform::from_parts(out, new_rate)
        .with_center_frequency_offset(w.center_frequency_offset()))
}

/// Band-limited resampling to `m` samples by spectral copy. Even-length
/// Nyquist bins are split (upsampling) or folded (downsampling) so that an
/// up/down pair is an exact identity.
pub fn fft_resample<T: Real>(x: &[Complex<T>], m: usize) -> Vec<Complex<T>> {
    let n = x.len();
    if m == n {
        return x.to_vec();
    }
    let mut spec = x.to_vec();
    FftPair::new(n).forward(&mut spec);
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; m];
    let k = n.min(m);
    let half = k / 2;
    // bins with |index| < k/2 (and the unpaired top bin for odd k)
    let pos = k.div_ceil(2);
    out[..pos].copy_from_slice(&spec[..pos]);
    for i in 1..=half {
        if k % 2 == 0 && i == half {
            continue;
        }
        out[m - i] = spec[n - i];
    }
    if k % 2 == 0 && k > 0 {
        if m < n {
            out[half] = spec[half] + spec[n - half];
        } else {
            let h = spec[half] * T::lit(0.5);
            out[half] = h;
            out[m - half] = h;
        }
    }
    let mut pair = FftPair::new(m);
    pair.inverse(&mut out);
    let scale = T::lit(m as f64 / n as f64);
    for v in &mut out {
        *v = *v * scale;
    }
    out
}

/// Zeroes every bin at or above `cutoff` Hz in magnitude.
pub(crate) fn lowpass<T: Real>(x: &mut [Complex<T>], rate: f64, cutoff: f64) {
    let n = x.len();
    let h: Vec<T> = (0..n)
        .map(|k| {
            if bin_frequency(k, n, rate).abs() < cutoff {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    FftPair::new(n).filter_real(x, &h);
}

#[inline]
fn keys(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Cubic interpolation at `t_k = k · ratio` input samples, wrapping around.
pub(crate) fn cubic_resample<T: Real>(x: &[Complex<T>], m: usize, ratio: f64) -> Vec<Complex<T>> {
    (0..m).map(|k| cubic_at(x, k as f64 * ratio)).collect()
}

/// Cubic interpolation of a periodic sequence at fractional index `t`.
#[inline]
pub fn cubic_at<T: Real>(x: &[Complex<T>], t: f64) -> Complex<T> {
    let n = x.len() as isize;
    let base = t.floor();
    let mu = t - base;
    let i0 = base as isize;
    let mut acc = Complex::new(T::zero(), T::zero());
    for d in -1..=2isize {
        let w = T::lit(keys(mu - d as f64));
        let idx = (i0 + d).rem_euclid(n) as usize;
        acc += x[idx] * w;
    }
    acc
}
