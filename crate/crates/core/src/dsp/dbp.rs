//! Digital backpropagation: the split-step solver run over `−z`.
//!
//! Each backward step is `L⁻¹(h/2)·N⁻¹(h)·L⁻¹(h/2)` with
//! `L⁻¹(h) = exp(+αh/2 − j(β₂ω²/2 − β₃ω³/6)h)` and
//! `N⁻¹(h) = exp(−j·ξ·γ_eff·Σ|A_c|²·h)`, the exact inverse of one forward
//! symmetric step. Amplifiers are assumed loss-matched; the field is scaled
//! to the launch power before propagating and restored afterwards.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::FiberParams;
use crate::error::{invalid, Error, Result};
use crate::num::{dbm_to_watt, Real};
use crate::signal::fft::FftPair;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbpConfig {
    pub enable: bool,
    pub steps_per_span: usize,
    /// Scaling of γ in the backward nonlinear step.
    pub xi_nl: f64,
    /// Launch power the received field is normalized to.
    pub launch_power_dbm: f64,
}

impl Default for DbpConfig {
    fn default() -> Self {
        Self {
            enable: false,
            steps_per_span: 20,
            xi_nl: 0.76,
            launch_power_dbm: -3.0,
        }
    }
}

impl DbpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_span == 0 {
            return Err(invalid("dbp.steps_per_span", "must be at least 1"));
        }
        if !(0.0..=1.5).contains(&self.xi_nl) {
            return Err(invalid("dbp.xi_nl", "must lie in [0, 1.5]"));
        }
        if !self.launch_power_dbm.is_finite() {
            return Err(invalid("dbp.launch_power_dbm", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbpPlan {
    pub fiber: FiberParams,
    pub n_spans: usize,
    pub steps_per_span: usize,
    pub xi_nl: f64,
    pub launch_power_w: f64,
}

impl DbpPlan {
    pub fn new(fiber: FiberParams, n_spans: usize, cfg: &DbpConfig) -> Result<Self> {
        cfg.validate()?;
        fiber.validate()?;
        Ok(Self {
            fiber,
            n_spans,
            steps_per_span: cfg.steps_per_span,
            xi_nl: cfg.xi_nl,
            launch_power_w: dbm_to_watt(cfg.launch_power_dbm),
        })
    }

    pub fn step_km(&self) -> f64 {
        self.fiber.length_km / self.steps_per_span as f64
    }

    pub fn total_km(&self) -> f64 {
        self.fiber.length_km * self.n_spans as f64
    }

    /// Checks the plan against the link it is meant to undo.
    pub fn check_link(&self, span_km: f64, n_spans: usize) -> Result<()> {
        if n_spans != self.n_spans
            || (span_km - self.fiber.length_km).abs() > 1e-9 * span_km.max(1.0)
        {
            return Err(Error::PlanMismatch {
                plan_km: self.total_km(),
                link_km: span_km * n_spans as f64,
            });
        }
        Ok(())
    }
}

/// Backpropagates the field whose components are `bufs` (all equal length,
/// sampled at `rate`).
pub fn dbp<T: Real>(bufs: &mut [Vec<Complex<T>>], rate: f64, plan: &DbpPlan) -> Result<()> {
    if bufs.is_empty() || plan.n_spans == 0 {
        return Ok(());
    }
    let n = bufs[0].len();
    if bufs.iter().any(|b| b.len() != n) {
        return Err(Error::LengthMismatch {
            context: "dbp components",
            left: n,
            right: bufs.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    let power: f64 = bufs.iter().map(|b| crate::num::mean_power(b)).sum();
    if !(power > 0.0) {
        return Err(Error::ZeroPower);
    }
    let norm = (plan.launch_power_w / power).sqrt();
    let f = &plan.fiber;
    let alpha = f.alpha();
    let g = plan.xi_nl * f.gamma_eff();
    let h = plan.step_km();
    let phase = f.dispersion_phase(n, rate);
    let op = |len: f64, extra: f64| -> Vec<Complex<T>> {
        let a = (0.5 * alpha * len).exp() * extra;
        phase
            .iter()
            .map(|&p| {
                let v = Complex::from_polar(a, -p * len);
                Complex::new(T::lit(v.re), T::lit(v.im))
            })
            .collect()
    };
    // the leading half step also undoes the amplifier and applies the
    // launch normalization
    let span_loss = (-0.5 * alpha * f.length_km).exp();
    let first = op(0.5 * h, span_loss * norm);
    let first_next = op(0.5 * h, span_loss);
    let full = op(h, 1.0);
    let last = op(0.5 * h, 1.0);
    let mut fft = FftPair::<T>::new(n);
    let mul = |b: &mut [Complex<T>], o: &[Complex<T>]| {
        for (s, v) in b.iter_mut().zip(o) {
            *s = *s * *v;
        }
    };
    let mut intensity = vec![T::zero(); n];
    for span in 0..plan.n_spans {
        for b in bufs.iter_mut() {
            fft.forward(b);
            mul(b, if span == 0 { &first } else { &first_next });
        }
        for step in 0..plan.steps_per_span {
            for b in bufs.iter_mut() {
                fft.inverse(b);
            }
            if g != 0.0 {
                intensity.iter_mut().for_each(|v| *v = T::zero());
                for b in bufs.iter() {
                    for (i, s) in intensity.iter_mut().zip(b) {
                        *i += s.norm_sqr();
                    }
                }
                let k = T::lit(-g * h);
                for b in bufs.iter_mut() {
                    for (s, &i) in b.iter_mut().zip(&intensity) {
                        let (sn, cs) = (k * i).sin_cos();
                        *s = *s * Complex::new(cs, sn);
                    }
                }
            }
            let o = if step + 1 == plan.steps_per_span {
                &last
            } else {
                &full
            };
            for b in bufs.iter_mut() {
                fft.forward(b);
                mul(b, o);
                if step + 1 == plan.steps_per_span {
                    fft.inverse(b);
                }
            }
        }
    }
    let inv = T::lit(1.0 / norm);
    for b in bufs.iter_mut() {
        for s in b.iter_mut() {
            *s = *s * inv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::cdc::cd_compensate;
    use crate::num::relative_rms;
    use rand::SeedableRng;

    fn block(n: usize, comps: usize, seed: u64) -> Vec<Vec<Complex<f64>>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for _ in 0..comps {
            let mut x: Vec<Complex<f64>> = (0..n)
                .map(|_| crate::num::complex_gaussian(&mut rng, 1.0))
                .collect();
            // band-limit to half the grid
            crate::signal::resample::lowpass(&mut x, 1.0, 0.25);
            out.push(x);
        }
        out
    }

    #[test]
    fn zero_xi_equals_cdc() {
        let rate = 18.67e9;
        let fiber = FiberParams::default();
        let cfg = DbpConfig {
            enable: true,
            xi_nl: 0.0,
            steps_per_span: 7,
            ..Default::default()
        };
        let plan = DbpPlan::new(fiber, 6, &cfg).unwrap();
        let x = block(4096, 4, 1);
        let mut a = x.clone();
        let mut b = x;
        dbp(&mut a, rate, &plan).unwrap();
        cd_compensate(&mut b, rate, &fiber, plan.total_km()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!(relative_rms(u, v) < 1e-9);
        }
    }

    #[test]
    fn plan_checks_link() {
        let plan = DbpPlan::new(FiberParams::default(), 10, &DbpConfig::default()).unwrap();
        assert!(plan.check_link(80.0, 10).is_ok());
        assert!(plan.check_link(100.0, 8).is_err());
        assert!(DbpConfig {
            xi_nl: 2.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
