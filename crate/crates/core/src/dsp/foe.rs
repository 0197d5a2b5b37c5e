//! Blind carrier-frequency-offset estimation from the 4th-power spectrum.
//!
//! Only symbols on a ring whose 4th powers coincide are used, so the
//! modulation is stripped to a single tone at `4Δf`. At one sample per
//! symbol the estimate is unambiguous within `±R_s/8`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};
use crate::signal::Constellation8Qam;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoeMethod {
    #[default]
    FourthPower,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoeConfig {
    pub method: FoeMethod,
    /// Half-width of the search, Hz; `None` is the full `R_s/8`.
    pub search_range_hz: Option<f64>,
    /// Minimum ratio of the spectral peak to the mean in-range power.
    pub min_peak_ratio: f64,
}

impl Default for FoeConfig {
    fn default() -> Self {
        Self {
            method: FoeMethod::FourthPower,
            search_range_hz: None,
            min_peak_ratio: 50.0,
        }
    }
}

impl FoeConfig {
    pub fn validate(&self, symbol_rate: f64) -> Result<()> {
        if let Some(r) = self.search_range_hz {
            if !(r > 0.0) || r > symbol_rate / 8.0 * (1.0 + 1e-9) {
                return Err(invalid(
                    "foe.search_range",
                    format!("{r} Hz must lie in (0, R_s/8 = {} Hz]", symbol_rate / 8.0),
                ));
            }
        }
        if !(self.min_peak_ratio >= 1.0) {
            return Err(invalid("foe.min_peak_ratio", "must be at least 1"));
        }
        Ok(())
    }

    pub fn range(&self, symbol_rate: f64) -> f64 {
        self.search_range_hz.unwrap_or(symbol_rate / 8.0)
    }
}

/// Band `(lo, hi)` of `|y|` (unit-power constellation) selecting the ring
/// whose points all share one 4th power; the largest such ring is used.
pub fn fourth_power_ring<T: Real>(c: &Constellation8Qam<T>) -> Result<(f64, f64)> {
    let radii = c.radii();
    let pts: Vec<Complex<f64>> = c
        .points
        .iter()
        .map(|p| Complex::new(p.re.as_f64(), p.im.as_f64()))
        .collect();
    let on = |r: f64| pts.iter().filter(move |p| (p.norm() - r).abs() < 1e-9);
    let idx = (0..radii.len())
        .rev()
        .find(|&i| {
            let q: Vec<Complex<f64>> = on(radii[i]).map(|p| p.powi(4)).collect();
            q.iter()
                .all(|v| (v - q[0]).norm() < 1e-9 * q[0].norm().max(1.0))
        })
        .ok_or(Error::Degenerate("no ring with a common 4th power"))?;
    let r = radii[idx];
    let lo = if idx > 0 {
        0.5 * (radii[idx - 1] + r)
    } else {
        0.0
    };
    let hi = if idx + 1 < radii.len() {
        0.5 * (radii[idx + 1] + r)
    } else {
        f64::INFINITY
    };
    Ok((lo, hi))
}

/// Estimates the offset jointly over all streams (1 sps at `symbol_rate`)
/// and removes it. Returns the estimate in Hz.
pub fn foe<T: Real>(
    streams: &mut [Vec<Complex<T>>],
    symbol_rate: f64,
    ring: (f64, f64),
    cfg: &FoeConfig,
) -> Result<f64> {
    cfg.validate(symbol_rate)?;
    if cfg.method == FoeMethod::None {
        return Ok(0.0);
    }
    let Some(n) = streams.first().map(Vec::len) else {
        return Err(Error::Empty);
    };
    if n == 0 {
        return Err(Error::Empty);
    }
    let nfft = (4 * n).next_power_of_two();
    let mut fft = FftPair::<f64>::new(nfft);
    let mut power = vec![0.0f64; nfft];
    for s in streams.iter() {
        let p = crate::num::mean_power(s);
        if !(p > 0.0) {
            return Err(Error::ZeroPower);
        }
        let g = p.sqrt().recip();
        let mut z = vec![Complex::new(0.0, 0.0); nfft];
        for (d, v) in z.iter_mut().zip(s) {
            let v = Complex::new(v.re.as_f64(), v.im.as_f64()) * g;
            let r = v.norm();
            if r >= ring.0 && r < ring.1 {
                *d = v.powi(4);
            }
        }
        fft.forward(&mut z);
        for (p, v) in power.iter_mut().zip(&z) {
            *p += v.norm_sqr();
        }
    }
    let range = 4.0 * cfg.range(symbol_rate);
    let bins: Vec<usize> = (0..nfft)
        .filter(|&k| bin_frequency(k, nfft, symbol_rate).abs() <= range)
        .collect();
    let (&peak, _) = bins
        .iter()
        .map(|k| (k, power[*k]))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or(Error::Empty)?;
    let mean = bins.iter().map(|&k| power[k]).sum::<f64>() / bins.len() as f64;
    let ratio = power[peak] / mean;
    if !(ratio >= cfg.min_peak_ratio) {
        return Err(Error::NoSpectralPeak(ratio));
    }
    // parabolic refinement on the magnitude
    let m = |k: usize| power[k % nfft].sqrt();
    let (a, b, c) = (m(peak + nfft - 1), m(peak), m(peak + 1));
    let den = a - 2.0 * b + c;
    let delta = if den.abs() > 0.0 {
        0.5 * (a - c) / den
    } else {
        0.0
    };
    let f4 = bin_frequency(peak, nfft, symbol_rate) + delta * symbol_rate / nfft as f64;
    let est = f4 / 4.0;
    derotate(streams, est / symbol_rate);
    Ok(est)
}

/// Multiplies symbol `k` by `exp(−j2π·f·k)` with `f` in cycles per symbol.
pub fn derotate<T: Real>(streams: &mut [Vec<Complex<T>>], f: f64) {
    for s in streams.iter_mut() {
        for (k, v) in s.iter_mut().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * f * k as f64;
            *v = *v * Complex::new(T::lit(ph.cos()), T::lit(ph.sin()));
        }
    }
}
