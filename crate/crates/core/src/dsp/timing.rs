//! Gardner timing recovery at 2 samples/symbol.
//!
//! A PI loop steers the fractional sampling instant `τ` (in input samples);
//! a cubic interpolator produces the on-time and mid-symbol samples. It runs
//! on a band-limited 4× upsampled copy: cubic interpolation straight off
//! 2 sps biases the detector by a few % of a UI at fractional offsets. The
//! block is treated as periodic: a first pass acquires the loop and the
//! second pass, started from the acquired state, produces the output.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::resample::{cubic_at, fft_resample};

const INTERP_OVERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingAlgorithm {
    #[default]
    Gardner,
    /// Pass-through; the input is assumed symbol aligned.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub algorithm: TimingAlgorithm,
    /// Normalized noise bandwidth `B_L·T`.
    pub loop_bw: f64,
    pub damping: f64,
    /// Slope of the power-normalized detector S-curve, per sample of offset.
    pub ted_gain: f64,
    /// Run the acquisition pass over the block before producing output.
    pub preroll: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            algorithm: TimingAlgorithm::Gardner,
            loop_bw: 5e-3,
            damping: std::f64::consts::FRAC_1_SQRT_2,
            ted_gain: TED_GAIN,
            preroll: true,
        }
    }
}

/// Measured S-curve slope of the detector below for RRC(0.2)-shaped 8-QAM,
/// normalized per branch power (see the `s_curve_slope` test).
pub const TED_GAIN: f64 = 0.76;

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_bw > 0.0 && self.loop_bw < 0.1) {
            return Err(invalid("timing.loop_bw", "must lie in (0, 0.1)"));
        }
        if !(self.damping > 0.0) {
            return Err(invalid("timing.damping", "must be positive"));
        }
        if !(self.ted_gain > 0.0) {
            return Err(invalid("timing.ted_gain", "must be positive"));
        }
        Ok(())
    }

    /// Proportional and integral gains of the loop filter.
    pub fn gains(&self) -> (f64, f64) {
        let z = self.damping;
        let th = self.loop_bw / (z + 0.25 / z);
        let d = 1.0 + 2.0 * z * th + th * th;
        (
            4.0 * z * th / d / self.ted_gain,
            4.0 * th * th / d / self.ted_gain,
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Sampling instant of the first output symbol, in input samples.
    pub initial_tau: f64,
    /// Sampling instant after the last output symbol.
    pub final_tau: f64,
    /// Mean offset of the recovered instant from the nominal grid, in UI,
    /// wrapped to `[−½, ½)`.
    pub mean_offset_ui: f64,
    pub ted_var_first: f64,
    pub ted_var_last: f64,
    /// The detector error variance grew over the output pass.
    pub diverged: bool,
}

/// Offset in samples at 2 sps to UI in `[−½, ½)`.
pub fn wrap_ui(tau: f64) -> f64 {
    ((tau + 1.0).rem_euclid(2.0) - 1.0) / 2.0
}

/// Gardner detector output for one symbol, summed over branches.
fn ted<T: Real>(prev: &[Complex<T>], mid: &[Complex<T>], cur: &[Complex<T>], norm: &[f64]) -> f64 {
    let mut e = 0.0;
    for b in 0..cur.len() {
        let d = prev[b] - cur[b];
        let m = mid[b];
        e += (m.re * d.re + m.im * d.im).as_f64() / norm[b];
    }
    e
}

/// Recovers symbol timing on 2-sps buffers and returns symbol-aligned 2-sps
/// buffers of the same length (even samples on symbol centers).
pub fn timing_recover<T: Real>(
    bufs: &[Vec<Complex<T>>],
    cfg: &TimingConfig,
) -> Result<(Vec<Vec<Complex<T>>>, TimingReport)> {
    cfg.validate()?;
    let Some(n) = bufs.first().map(Vec::len) else {
        return Err(Error::Empty);
    };
    if n < 8 || n % 2 != 0 {
        return Err(invalid(
            "timing input",
            format!("length {n} must be even and ≥ 8"),
        ));
    }
    if bufs.iter().any(|b| b.len() != n) {
        return Err(Error::LengthMismatch {
            context: "timing branches",
            left: n,
            right: bufs.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    if cfg.algorithm == TimingAlgorithm::None {
        return Ok((bufs.to_vec(), TimingReport::default()));
    }
    let nb = bufs.len();
    let n_sym = n / 2;
    let norm: Vec<f64> = bufs
        .iter()
        .map(|b| crate::num::mean_power(b).max(f64::MIN_POSITIVE) * nb as f64)
        .collect();
    let (kp, ki) = cfg.gains();
    let up = INTERP_OVERSAMPLE as f64;
    let fine: Vec<Vec<Complex<T>>> = bufs
        .iter()
        .map(|b| fft_resample(b, n * INTERP_OVERSAMPLE))
        .collect();
    let at = |t: f64| -> Vec<Complex<T>> { fine.iter().map(|b| cubic_at(b, t * up)).collect() };

    let mut tau = 0.0f64;
    let mut integ = 0.0f64;
    let mut prev = at(tau - 2.0);
    let passes = if cfg.preroll { 2 } else { 1 };
    let mut out = vec![Vec::with_capacity(n); nb];
    let mut errs = Vec::with_capacity(n_sym);
    let mut initial_tau = 0.0;
    let mut offset_sum = 0.0;
    for pass in 0..passes {
        let last = pass + 1 == passes;
        if last {
            initial_tau = tau;
        }
        for k in 0..n_sym {
            let t = 2.0 * k as f64 + tau;
            let mid = at(t - 1.0);
            let cur = at(t);
            let e = ted(&prev, &mid, &cur, &norm);
            integ += ki * e;
            tau += kp * e + integ;
            if last {
                for b in 0..nb {
                    out[b].push(cur[b]);
                    out[b].push(cubic_at(&fine[b], (t + 1.0) * up));
                }
                errs.push(e);
                offset_sum += tau;
            }
            prev = cur;
        }
    }
    let q = errs.len() / 4;
    let var = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len().max(1) as f64;
        s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len().max(1) as f64
    };
    let first = var(&errs[..q]);
    let lastv = var(&errs[errs.len() - q..]);
    let mean_tau = offset_sum / n_sym as f64;
    Ok((
        out,
        TimingReport {
            initial_tau,
            final_tau: tau,
            mean_offset_ui: wrap_ui(mean_tau),
            ted_var_first: first,
            ted_var_last: lastv,
            diverged: !(lastv <= 2.0 * first) || !tau.is_finite(),
        },
    ))
}
