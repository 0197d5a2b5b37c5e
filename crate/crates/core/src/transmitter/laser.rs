use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::{dbm_to_watt, Real};
use crate::signal::ComplexWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserParams {
    pub power_dbm: f64,
    pub linewidth_hz: f64,
    pub wavelength_m: f64,
    pub azimuth_deg: f64,
    /// Carrier offset from the nominal grid frequency. For a local
    /// oscillator this is `f_signal − f_lo`, the intermediate frequency seen
    /// after detection.
    pub frequency_offset_hz: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            power_dbm: 20.0,
            linewidth_hz: 0.1e6,
            wavelength_m: 1550e-9,
            azimuth_deg: 45.0,
            frequency_offset_hz: 0.0,
        }
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth_hz >= 0.0) {
            return Err(invalid("linewidth_hz", "must be non-negative"));
        }
        if !self.power_dbm.is_finite() {
            return Err(invalid("power_dbm", "must be finite"));
        }
        if !(self.wavelength_m > 1.2e-6 && self.wavelength_m < 1.7e-6) {
            return Err(invalid(
                "wavelength_m",
                format!("{} outside (1.2 µm, 1.7 µm)", self.wavelength_m),
            ));
        }
        Ok(())
    }

    pub fn power_watt(&self) -> f64 {
        dbm_to_watt(self.power_dbm)
    }
}

/// CW laser field: amplitude `sqrt(P)` with Wiener phase noise of increment
/// variance `2π·linewidth/rate` and an optional frequency offset.
pub fn laser<T: Real>(
    params: &LaserParams,
    n: usize,
    rate: f64,
    seed: u64,
) -> Result<ComplexWaveform<T>> {
    params.validate()?;
    if n == 0 {
        return Err(crate::error::Error::Empty);
    }
    let amp = params.power_watt().sqrt();
    let sigma = (2.0 * std::f64::consts::PI * params.linewidth_hz / rate).sqrt();
    let omega = 2.0 * std::f64::consts::PI * params.frequency_offset_hz / rate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0f64;
    let samples = (0..n)
        .map(|i| {
            if i > 0 && sigma > 0.0 {
                phase += sigma * f64::std_normal(&mut rng);
            }
            let p = phase + omega * i as f64;
            Complex::new(T::lit(amp * p.cos()), T::lit(amp * p.sin()))
        })
        .collect();
    ComplexWaveform::new(samples, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_linewidth_is_constant() {
        let p = LaserParams {
            linewidth_hz: 0.0,
            ..Default::default()
        };
        let w: ComplexWaveform<f64> = laser(&p, 1000, 1e9, 1).unwrap();
        let s0 = w.samples()[0];
        assert!(w.samples().iter().all(|&s| s == s0));
    }

    #[test]
    fn zero_dbm_is_one_milliwatt() {
        let p = LaserParams {
            power_dbm: 0.0,
            ..Default::default()
        };
        let w: ComplexWaveform<f64> = laser(&p, 4096, 112e9, 7).unwrap();
        for s in w.samples() {
            assert!((s.norm_sqr() - 1e-3).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_increment_variance() {
        let p = LaserParams::default();
        let rate = 112e9;
        let w: ComplexWaveform<f64> = laser(&p, 1_000_000, rate, 3).unwrap();
        let d: Vec<f64> = w
            .samples()
            .windows(2)
            .map(|x| (x[1] * x[0].conj()).arg())
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let expected = 2.0 * std::f64::consts::PI * 1e5 / rate;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn wavelength_range_enforced() {
        let p = LaserParams {
            wavelength_m: 980e-9,
            ..Default::default()
        };
        assert!(laser::<f64>(&p, 8, 1e9, 0).is_err());
    }
}
