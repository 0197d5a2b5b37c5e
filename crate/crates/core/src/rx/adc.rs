use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;
use crate::signal::resample::fft_resample;
use crate::signal::{resample::resampled_len, ComplexWaveform};

/// Per-tributary bit rate against which samples-per-bit is counted.
pub const TRIBUTARY_BIT_RATE: f64 = 28e9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcParams {
    /// Receiver samples per tributary bit; the sampling rate is
    /// `samples_per_bit × 28 GSa/s`.
    pub samples_per_bit: f64,
    /// Resolution; `None` is ideal.
    pub bits: Option<u32>,
    /// Clipping level per quadrature; `None` uses ±4σ of each quadrature.
    pub full_scale: Option<f64>,
}

impl Default for AdcParams {
    fn default() -> Self {
        Self {
            samples_per_bit: 4.0,
            bits: None,
            full_scale: None,
        }
    }
}

impl AdcParams {
    pub fn sample_rate(&self) -> f64 {
        self.samples_per_bit * TRIBUTARY_BIT_RATE
    }

    pub fn eight_bit() -> Self {
        Self {
            bits: Some(8),
            ..Self::default()
        }
    }
}

fn quantize<T: Real>(x: &mut [Complex<T>], bits: u32, full_scale: Option<f64>) {
    let levels = (1u64 << bits.min(52)) as f64;
    let range = |f: &dyn Fn(&Complex<T>) -> f64| -> f64 {
        full_scale.unwrap_or_else(|| {
            let v = x.iter().map(|s| f(s).powi(2)).sum::<f64>() / x.len() as f64;
            4.0 * v.sqrt()
        })
    };
    let ri = range(&|s| s.re.as_f64());
    let rq = range(&|s| s.im.as_f64());
    let q = |v: f64, fs: f64| -> f64 {
        if fs <= 0.0 {
            return 0.0;
        }
        let step = 2.0 * fs / levels;
        // mid-rise quantizer clipped to the outermost levels
        let k = (v / step).floor().clamp(-levels / 2.0, levels / 2.0 - 1.0);
        (k + 0.5) * step
    };
    for s in x.iter_mut() {
        *s = Complex::new(T::lit(q(s.re.as_f64(), ri)), T::lit(q(s.im.as_f64(), rq)));
    }
}

/// Band-limited resampling to the ADC rate and optional uniform quantization.
pub fn adc<T: Real>(w: &ComplexWaveform<T>, p: &AdcParams) -> Result<ComplexWaveform<T>> {
    let rate = p.sample_rate();
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(invalid("samples_per_bit", "must be positive"));
    }
    if rate > w.sample_rate() * (1.0 + 1e-12) {
        return Err(invalid(
            "samples_per_bit",
            format!(
                "ADC rate {rate} exceeds the waveform rate {}; propagate at a higher rate",
                w.sample_rate()
            ),
        ));
    }
    if let Some(fs) = p.full_scale {
        if !(fs > 0.0) {
            return Err(invalid("full_scale", "must be positive"));
        }
    }
    let same = (rate - w.sample_rate()).abs() <= 1e-12 * rate;
    let mut out = if same {
        w.samples().to_vec()
    } else {
        fft_resample(w.samples(), resampled_len(w.len(), w.sample_rate(), rate))
    };
    if let Some(b) = p.bits {
        if b == 0 {
            return Err(invalid("bits", "must be at least 1"));
        }
        quantize(&mut out, b, p.full_scale);
    }
    ComplexWaveform::new(out, if same { w.sample_rate() } else { rate })
}
