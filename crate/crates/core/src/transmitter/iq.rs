use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};
use crate::signal::ComplexWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseShape {
    Nrz,
    Rrc { rolloff: f64 },
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::Rrc { rolloff: 0.2 }
    }
}

/// I/Q imbalance of a modulator or of a receiver hybrid. All-zero is ideal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IqModulatorParams {
    /// Power ratio of I over Q in dB.
    pub gain_imbalance_db: f64,
    /// Skew of the Q axis towards I, radians.
    pub phase_error_rad: f64,
    /// DC offsets as fractions of the RMS baseband amplitude.
    pub dc_offset_i: f64,
    pub dc_offset_q: f64,
}

impl IqModulatorParams {
    pub fn is_ideal(&self) -> bool {
        *self == Self::default()
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.gain_imbalance_db,
            self.phase_error_rad,
            self.dc_offset_i,
            self.dc_offset_q,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("iq", "impairments must be finite"))
        }
    }

    /// `g_I·I + j·g_Q·(Q·cosφ + I·sinφ)` plus DC offsets, in place.
    pub fn apply<T: Real>(&self, x: &mut [Complex<T>]) {
        if self.is_ideal() {
            return;
        }
        let gi = 10f64.powf(self.gain_imbalance_db / 40.0);
        let gq = 10f64.powf(-self.gain_imbalance_db / 40.0);
        let (sp, cp) = self.phase_error_rad.sin_cos();
        let rms = crate::num::mean_power(x).sqrt();
        let (di, dq) = (self.dc_offset_i * rms, self.dc_offset_q * rms);
        for v in x.iter_mut() {
            let (i, q) = (v.re.as_f64(), v.im.as_f64());
            *v = Complex::new(T::lit(gi * i + di), T::lit(gq * (q * cp + i * sp) + dq));
        }
    }
}

/// Frequency response of a root-raised-cosine pulse on an `n`-point grid at
/// `sps` samples per symbol, scaled so shaped symbols keep their power.
pub fn rrc_response(n: usize, sps: usize, rolloff: f64) -> Vec<f64> {
    let lo = 0.5 * (1.0 - rolloff);
    let hi = 0.5 * (1.0 + rolloff);
    (0..n)
        .map(|k| {
            // cycles per symbol
            let f = bin_frequency(k, n, sps as f64).abs();
            let rc = if f <= lo {
                1.0
            } else if f <= hi {
                0.5 * (1.0 + (std::f64::consts::PI / rolloff * (f - lo)).cos())
            } else {
                0.0
            };
            sps as f64 * rc.sqrt()
        })
        .collect()
}

/// Zero-phase receive filter matched to `pulse`, on an `n`-point grid at
/// `rate`, unit gain at DC. NRZ gets `sinc(f/R_s)`.
pub fn matched_response(pulse: PulseShape, n: usize, rate: f64, symbol_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let f = bin_frequency(k, n, rate).abs() / symbol_rate;
            match pulse {
                PulseShape::Nrz => {
                    if f == 0.0 {
                        1.0
                    } else {
                        let x = std::f64::consts::PI * f;
                        x.sin() / x
                    }
                }
                PulseShape::Rrc { rolloff } => {
                    let lo = 0.5 * (1.0 - rolloff);
                    let hi = 0.5 * (1.0 + rolloff);
                    if f <= lo {
                        1.0
                    } else if f <= hi {
                        (0.5 * (1.0 + (std::f64::consts::PI / rolloff * (f - lo)).cos())).sqrt()
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

/// Upsamples symbols to `sps` samples per symbol with the given pulse.
///
/// NRZ holds each symbol for `sps` samples. RRC places symbol `k` at sample
/// `k·sps` and filters circularly with the exact spectral response.
pub fn shape_pulses<T: Real>(
    symbols: &[Complex<T>],
    sps: usize,
    pulse: PulseShape,
) -> Result<Vec<Complex<T>>> {
    if sps == 0 {
        return Err(invalid("sps", "must be at least 1"));
    }
    let zero = Complex::new(T::zero(), T::zero());
    match pulse {
        PulseShape::Nrz => Ok(symbols
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, sps))
            .collect()),
        PulseShape::Rrc { rolloff } => {
            if !(rolloff > 0.0 && rolloff <= 1.0) {
                return Err(invalid("rolloff", "must be in (0, 1]"));
            }
            let n = symbols.len() * sps;
            let mut buf = vec![zero; n];
            for (k, &s) in symbols.iter().enumerate() {
                buf[k * sps] = s;
            }
            let h: Vec<T> = rrc_response(n, sps, rolloff)
                .into_iter()
                .map(T::lit)
                .collect();
            FftPair::new(n).filter_real(&mut buf, &h);
            Ok(buf)
        }
    }
}

/// Modulates `carrier` with pulse-shaped `symbols` through an I/Q modulator.
pub fn iq_modulate<T: Real>(
    carrier: &ComplexWaveform<T>,
    symbols: &[Complex<T>],
    sps: usize,
    pulse: PulseShape,
    imp: &IqModulatorParams,
) -> Result<ComplexWaveform<T>> {
    imp.validate()?;
    if carrier.len() != symbols.len() * sps {
        return Err(Error::LengthMismatch {
            context: "iq_modulate carrier vs symbols·sps",
            left: carrier.len(),
            right: symbols.len() * sps,
        });
    }
    let mut base = shape_pulses(symbols, sps, pulse)?;
    imp.apply(&mut base);
    let out = base
        .into_iter()
        .zip(carrier.samples())
        .map(|(b, c)| b * *c)
        .collect();
    ComplexWaveform::new(out, carrier.sample_rate())
}
