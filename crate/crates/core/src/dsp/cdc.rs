//! Static chromatic-dispersion compensation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::FiberParams;
use crate::error::{invalid, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, ifft, FftPair};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdcMode {
    #[default]
    Freq,
    Time,
}

/// All-pass inverse of the fiber dispersion over `distance_km`:
/// `exp(−j(β₂ω²/2 − β₃ω³/6)·L)` in bin order.
pub fn cdc_response(
    fiber: &FiberParams,
    distance_km: f64,
    n: usize,
    rate: f64,
) -> Vec<Complex<f64>> {
    fiber
        .dispersion_phase(n, rate)
        .into_iter()
        .map(|p| Complex::from_polar(1.0, -p * distance_km))
        .collect()
}

/// Minimum FIR length `2π|β₂|L·f_s²`, rounded up to odd, for the time-domain
/// compensator.
pub fn min_fir_taps(fiber: &FiberParams, distance_km: f64, rate: f64) -> usize {
    let n = (2.0 * std::f64::consts::PI * fiber.beta2().abs() * distance_km * rate * rate).ceil()
        as usize;
    n.max(1) | 1
}

/// Fraction of Nyquist over which the FIR design response is exact; above
/// it a raised-cosine taper brings the response to zero at Nyquist, so the
/// truncated taps decay without the ringing of the wrapped chirp.
pub const FIR_FLAT_FRACTION: f64 = 0.75;

/// FIR taps: the inverse transform of the tapered response on a
/// `grid`-point grid, truncated to `taps` centered coefficients.
pub fn cdc_fir(
    fiber: &FiberParams,
    distance_km: f64,
    rate: f64,
    taps: usize,
    grid: usize,
) -> Vec<Complex<f64>> {
    let grid = grid.max(taps);
    let nyq = 0.5 * rate;
    let edge = FIR_FLAT_FRACTION * nyq;
    let resp: Vec<Complex<f64>> = cdc_response(fiber, distance_km, grid, rate)
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let f = bin_frequency(k, grid, rate).abs();
            if f <= edge {
                v
            } else {
                let t = ((f - edge) / (nyq - edge)).min(1.0);
                v * (0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
            }
        })
        .collect();
    let h = ifft(&resp);
    let half = (taps / 2) as isize;
    (-half..=half)
        .map(|k| h[k.rem_euclid(grid as isize) as usize])
        .collect()
}

fn check(distance_km: f64) -> Result<()> {
    if !(distance_km >= 0.0) || !distance_km.is_finite() {
        return Err(invalid("distance_km", "must be finite and ≥ 0"));
    }
    Ok(())
}

/// Frequency-domain compensation of every buffer.
pub fn cd_compensate<T: Real>(
    bufs: &mut [Vec<Complex<T>>],
    rate: f64,
    fiber: &FiberParams,
    distance_km: f64,
) -> Result<()> {
    check(distance_km)?;
    if distance_km == 0.0 || bufs.is_empty() {
        return Ok(());
    }
    let n = bufs[0].len();
    let h: Vec<Complex<T>> = cdc_response(fiber, distance_km, n, rate)
        .into_iter()
        .map(|v| Complex::new(T::lit(v.re), T::lit(v.im)))
        .collect();
    let mut f = FftPair::new(n);
    for b in bufs.iter_mut() {
        f.filter(b, &h);
    }
    Ok(())
}

/// Time-domain compensation with a centered FIR of `taps` coefficients
/// (`None` picks twice the analytic minimum), applied circularly.
pub fn cd_compensate_fir<T: Real>(
    bufs: &mut [Vec<Complex<T>>],
    rate: f64,
    fiber: &FiberParams,
    distance_km: f64,
    taps: Option<usize>,
) -> Result<()> {
    check(distance_km)?;
    if distance_km == 0.0 || bufs.is_empty() {
        return Ok(());
    }
    let n = bufs[0].len();
    let taps = taps.unwrap_or_else(|| (min_fir_taps(fiber, distance_km, rate) * 2) | 1);
    if taps % 2 == 0 || taps > n {
        return Err(invalid(
            "cdc.taps",
            format!("{taps} must be odd and ≤ block length {n}"),
        ));
    }
    let h: Vec<Complex<T>> = cdc_fir(fiber, distance_km, rate, taps, n.max(4 * taps))
        .into_iter()
        .map(|v| Complex::new(T::lit(v.re), T::lit(v.im)))
        .collect();
    let half = taps / 2;
    for b in bufs.iter_mut() {
        let x = b.clone();
        for (i, out) in b.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, &c) in h.iter().enumerate() {
                // y[i] = Σ h[k−half]·x[i−(k−half)]
                let idx = (i + n + half - k) % n;
                acc += c * x[idx];
            }
            *out = acc;
        }
    }
    Ok(())
}

/// Magnitude check helper used by tests and the stage report.
pub fn max_gain_deviation(h: &[Complex<f64>]) -> f64 {
    h.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::relative_rms;
    use crate::signal::{generate_bits, map_8qam, BitGenerator, Constellation8Qam};
    use crate::transmitter::{shape_pulses, PulseShape};

    fn signal(n_sym: usize, sps: usize) -> Vec<Complex<f64>> {
        let c = Constellation8Qam::<f64>::default();
        let b = generate_bits(3 * n_sym, 4, BitGenerator::Uniform);
        let s = map_8qam(&b, &c, 1.0).unwrap();
        shape_pulses(s.samples(), sps, PulseShape::Rrc { rolloff: 0.2 }).unwrap()
    }

    #[test]
    fn response_is_all_pass() {
        let h = cdc_response(&FiberParams::default(), 800.0, 1 << 14, 18.67e9);
        assert!(max_gain_deviation(&h) < 1e-12);
    }

    #[test]
    fn zero_distance_is_identity() {
        let x = signal(256, 2);
        let mut b = vec![x.clone()];
        cd_compensate(&mut b, 18.67e9, &FiberParams::default(), 0.0).unwrap();
        assert_eq!(b[0], x);
    }

    #[test]
    fn inverts_pure_dispersion() {
        let rate = 2.0 * 28e9 / 3.0;
        let fiber = FiberParams {
            alpha_db_km: 0.0,
            n2: 0.0,
            length_km: 800.0,
            ..Default::default()
        };
        let x = signal(4096, 2);
        let mut y = x.clone();
        let h = fiber.transfer(y.len(), rate, 800.0);
        FftPair::new(y.len()).filter(&mut y, &h);
        let mut b = vec![y];
        cd_compensate(&mut b, rate, &fiber, 800.0).unwrap();
        assert!(relative_rms(&b[0], &x) < 1e-9);
    }

    #[test]
    fn fir_agrees_with_frequency_domain() {
        let rate = 2.0 * 28e9 / 3.0;
        let fiber = FiberParams::default();
        let x = signal(4096, 2);
        let mut a = vec![x.clone()];
        let mut b = vec![x];
        cd_compensate(&mut a, rate, &fiber, 400.0).unwrap();
        let taps = (min_fir_taps(&fiber, 400.0, rate) * 2) | 1;
        cd_compensate_fir(&mut b, rate, &fiber, 400.0, Some(taps)).unwrap();
        let e = relative_rms(&b[0], &a[0]);
        assert!(e < 1e-3, "{e}");
    }
}
