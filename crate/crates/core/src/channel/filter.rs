use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};
use crate::signal::OpticalField;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterShape {
    #[default]
    Rect,
    /// Super-Gaussian of the given order; 3 dB down at ±B/2.
    Gaussian { order: u32 },
}

/// Power transfer `|H(f)|²` of the band-pass filter at baseband offset `f`.
pub fn obpf_power_response(f: f64, bandwidth: f64, shape: FilterShape) -> f64 {
    let x = 2.0 * f / bandwidth;
    match shape {
        FilterShape::Rect => {
            if x.abs() <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        FilterShape::Gaussian { order } => {
            (-std::f64::consts::LN_2 * x.abs().powi(2 * order.max(1) as i32)).exp()
        }
    }
}

/// Optical band-pass filter centred on the carrier, applied to every field
/// component.
pub fn obpf<T: Real>(
    field: &OpticalField<T>,
    bandwidth: f64,
    shape: FilterShape,
) -> Result<OpticalField<T>> {
    let rate = field.sample_rate();
    if !(bandwidth > 0.0) || bandwidth >= rate {
        return Err(Error::AboveNyquist {
            bandwidth,
            limit: rate,
        });
    }
    let n = field.len();
    let h: Vec<T> = (0..n)
        .map(|k| T::lit(obpf_power_response(bin_frequency(k, n, rate), bandwidth, shape).sqrt()))
        .collect();
    let mut fft = FftPair::new(n);
    let mut out = field.clone();
    for b in out.component_slices_mut() {
        fft.filter_real(b, &h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ComplexWaveform, JonesSignal};
    use num_complex::Complex;
    use rand::SeedableRng;

    fn field(x: Vec<Complex<f64>>, rate: f64) -> OpticalField<f64> {
        let n = x.len();
        OpticalField::single(
            JonesSignal::new(
                ComplexWaveform::new(x, rate).unwrap(),
                ComplexWaveform::zeros(n, rate).unwrap(),
            )
            .unwrap(),
        )
    }

    fn tone(n: usize, f: f64, rate: f64) -> Vec<Complex<f64>> {
        (0..n)
            .map(|i| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * f * i as f64 / rate))
            .collect()
    }

    #[test]
    fn dc_tone_unchanged() {
        for shape in [
            FilterShape::Rect,
            FilterShape::Gaussian { order: 1 },
            FilterShape::Gaussian { order: 3 },
        ] {
            let f = field(vec![Complex::new(1.0, 0.0); 1024], 448e9);
            let out = obpf(&f, 100e9, shape).unwrap();
            let db = 10.0 * (out.power() / f.power()).log10();
            assert!(db.abs() < 0.01);
        }
    }

    #[test]
    fn white_noise_fraction() {
        let n = 1 << 16;
        let rate = 448e9;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Complex<f64>> = (0..n)
            .map(|_| crate::num::complex_gaussian(&mut rng, 1.0))
            .collect();
        let f = field(x, rate);
        let out = obpf(&f, 100e9, FilterShape::Rect).unwrap();
        let ratio = out.power() / f.power();
        assert!((ratio / (100.0 / 448.0) - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn out_of_band_tone_suppressed() {
        let n = 4480;
        let rate = 448e9;
        let f = field(tone(n, 200e9, rate), rate);
        let out = obpf(&f, 100e9, FilterShape::Rect).unwrap();
        assert!(10.0 * (out.power() / f.power()).log10() < -60.0);
    }

    #[test]
    fn gaussian_edge_is_three_db() {
        for order in 1..4 {
            let p = obpf_power_response(50e9, 100e9, FilterShape::Gaussian { order });
            assert!((10.0 * p.log10() + 3.0103).abs() < 1e-3);
        }
    }

    #[test]
    fn bandwidth_at_sample_rate_rejected() {
        let f = field(tone(64, 0.0, 100e9), 100e9);
        assert!(matches!(
            obpf(&f, 100e9, FilterShape::Rect),
            Err(Error::AboveNyquist { .. })
        ));
    }
}
