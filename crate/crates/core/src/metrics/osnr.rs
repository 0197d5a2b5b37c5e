//! OSNR measurement, analytic link budget and required-OSNR search.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::ledger_osnr_db;
use crate::error::{invalid, Error, Result};
use crate::num::consts::{PLANCK, SPEED_OF_LIGHT};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};
use crate::signal::OpticalField;

/// 0.1 nm at 1550 nm.
pub const REF_BANDWIDTH_HZ: f64 = 12.5e9;

/// `−10·log₁₀(h·ν·B_ref / 1 mW)` at 1550 nm and 12.5 GHz, rounded as is
/// customary.
pub const BUDGET_CONSTANT_DB: f64 = 58.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum OsnrMethod {
    /// Signal power and injected ASE tracked along the link.
    NoiseBookkeeping,
    /// Noise floor read from the spectrum either side of the signal band and
    /// interpolated underneath it.
    SpectralInterp { signal_bandwidth_hz: f64 },
}

impl Default for OsnrMethod {
    fn default() -> Self {
        OsnrMethod::NoiseBookkeeping
    }
}

/// Signal power over ASE power in `ref_bw`, dB.
pub fn measure_osnr<T: Real>(
    field: &OpticalField<T>,
    method: OsnrMethod,
    ref_bw: f64,
) -> Result<f64> {
    if !(ref_bw > 0.0) {
        return Err(invalid("ref_bw", "must be positive"));
    }
    match method {
        OsnrMethod::NoiseBookkeeping => ledger_osnr_db(field, ref_bw),
        OsnrMethod::SpectralInterp {
            signal_bandwidth_hz,
        } => spectral_osnr(field, signal_bandwidth_hz, ref_bw),
    }
}

/// Welch PSD (Hann, half overlap) summed over all field components, W/Hz,
/// in FFT bin order.
pub fn power_spectral_density<T: Real>(
    field: &OpticalField<T>,
    segment: usize,
) -> Result<Vec<f64>> {
    let n = field.len();
    let seg = segment.min(n);
    if seg < 16 {
        return Err(invalid("psd.segment", "too short"));
    }
    let fs = field.sample_rate();
    let w: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos())
        .collect();
    let wp: f64 = w.iter().map(|v| v * v).sum();
    let mut fft = FftPair::<f64>::new(seg);
    let mut psd = vec![0.0; seg];
    let hop = seg / 2;
    let mut count = 0usize;
    for comp in field.components() {
        let x = comp.samples();
        let mut start = 0;
        while start + seg <= n {
            let mut b: Vec<Complex<f64>> = x[start..start + seg]
                .iter()
                .zip(&w)
                .map(|(v, &g)| Complex::new(v.re.as_f64() * g, v.im.as_f64() * g))
                .collect();
            fft.forward(&mut b);
            for (p, v) in psd.iter_mut().zip(&b) {
                *p += v.norm_sqr();
            }
            count += 1;
            start += hop;
        }
    }
    let segs_per_comp = count as f64 / field.n_components() as f64;
    let k = 1.0 / (fs * wp * segs_per_comp);
    psd.iter_mut().for_each(|p| *p *= k);
    Ok(psd)
}

fn spectral_osnr<T: Real>(field: &OpticalField<T>, bw: f64, ref_bw: f64) -> Result<f64> {
    let fs = field.sample_rate();
    if !(bw > 0.0) {
        return Err(invalid("signal_bandwidth_hz", "must be positive"));
    }
    let (inner, outer) = (0.75 * bw, (1.5 * bw).min(0.45 * fs));
    if outer <= inner {
        return Err(invalid(
            "signal_bandwidth_hz",
            "no out-of-band region left for the noise floor; sample faster",
        ));
    }
    let psd = power_spectral_density(field, 4096)?;
    let m = psd.len();
    let df = fs / m as f64;
    let (mut lo, mut nlo, mut hi, mut nhi, mut band, mut nband) = (0.0, 0, 0.0, 0, 0.0, 0);
    for (k, &p) in psd.iter().enumerate() {
        let f = bin_frequency(k, m, fs);
        if f.abs() <= 0.55 * bw {
            band += p * df;
            nband += 1;
        } else if f.abs() >= inner && f.abs() <= outer {
            if f < 0.0 {
                lo += p;
                nlo += 1;
            } else {
                hi += p;
                nhi += 1;
            }
        }
    }
    if nlo == 0 || nhi == 0 {
        return Err(Error::Degenerate("empty noise-floor band"));
    }
    // flat floor: the interpolant at band center is the mean of both sides
    let floor = 0.5 * (lo / nlo as f64 + hi / nhi as f64);
    let signal = band - floor * nband as f64 * df;
    if !(floor > 0.0) {
        return Ok(f64::INFINITY);
    }
    if !(signal > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(10.0 * (signal / (floor * ref_bw)).log10())
}

/// `−10·log₁₀(h·ν·B_ref/1 mW)`, the exact form of [`BUDGET_CONSTANT_DB`].
pub fn budget_constant_db(wavelength_m: f64, ref_bw: f64) -> f64 {
    -10.0 * (PLANCK * SPEED_OF_LIGHT / wavelength_m * ref_bw / 1e-3).log10()
}

/// Maximum achievable OSNR of an amplified link, dB in 0.1 nm:
/// `58 + P_launch − NF − span_loss − 10·log₁₀(N)`.
pub fn osnr_max_achievable(
    p_launch_dbm: f64,
    nf_db: f64,
    span_loss_db: f64,
    n_spans: usize,
) -> Result<f64> {
    if n_spans == 0 {
        return Err(invalid("n_spans", "must be at least 1"));
    }
    Ok(BUDGET_CONSTANT_DB + p_launch_dbm - nf_db - span_loss_db - 10.0 * (n_spans as f64).log10())
}

pub fn osnr_margin(max_achievable_db: f64, required_db: f64) -> f64 {
    max_achievable_db - required_db
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OsnrSearch {
    pub lo: f64,
    pub hi: f64,
    /// Stop when the bracket is narrower than this, dB.
    pub tol: f64,
}

impl Default for OsnrSearch {
    fn default() -> Self {
        Self {
            lo: 5.0,
            hi: 40.0,
            tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequiredOsnr {
    pub osnr_db: f64,
    /// Every (OSNR, BER) evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether BER was nonincreasing in OSNR over all evaluations.
    pub monotone: bool,
}

/// Bisects for the OSNR at which `ber_at` crosses `target`.
///
/// `ber_at` must use the same noise realization at every level for the map
/// to be monotone. The final value interpolates `log₁₀ BER` linearly across
/// the last bracket.
pub fn osnr_required<F>(mut ber_at: F, target: f64, search: &OsnrSearch) -> Result<RequiredOsnr>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(target > 0.0 && target < 0.5) {
        return Err(invalid("target_ber", "must lie in (0, 0.5)"));
    }
    if !(search.lo < search.hi) || !(search.tol > 0.0) {
        return Err(invalid("search", "need lo < hi and tol > 0"));
    }
    let mut evals = Vec::new();
    let mut eval = |o: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let b = ber_at(o)?;
        evals.push((o, b));
        Ok(b)
    };
    let (mut lo, mut hi) = (search.lo, search.hi);
    let mut b_lo = eval(lo, &mut evals)?;
    let mut b_hi = eval(hi, &mut evals)?;
    if b_lo <= target || b_hi > target {
        return Err(Error::Bracket {
            lo,
            hi,
            target,
            ber_lo: b_lo,
            ber_hi: b_hi,
        });
    }
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        let b = eval(mid, &mut evals)?;
        if b > target {
            lo = mid;
            b_lo = b;
        } else {
            hi = mid;
            b_hi = b;
        }
    }
    let osnr_db = if b_hi > 0.0 {
        let (a, b, t) = (b_lo.log10(), b_hi.log10(), target.log10());
        (lo + (hi - lo) * (a - t) / (a - b)).clamp(lo, hi)
    } else {
        hi
    };
    let mut sorted = evals.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(RequiredOsnr {
        osnr_db,
        evaluations: evals,
        monotone,
    })
}
