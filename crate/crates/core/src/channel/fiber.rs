//! Fiber parameters and split-step Fourier propagation.
//!
//! Units inside the propagator: distance in km, angular frequency in rad/s,
//! `β₂` in s²/km, `β₃` in s³/km, `γ` in 1/(W·km), field loss `α` in 1/km.
//! The time-domain equation is
//!
//! ```text
//! ∂A/∂z = −(α/2)·A − j(β₂/2)·∂²A/∂t² + (β₃/6)·∂³A/∂t³ + jγ_eff·|A|²·A
//! ```
//!
//! and with the FFT convention of [`crate::signal::fft`] (`∂/∂t → +jω`) the
//! linear operator becomes `−α/2 + jβ₂ω²/2 − jβ₃ω³/6`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{consts::SPEED_OF_LIGHT, Real};
use crate::signal::fft::{angular_frequencies, FftPair};
use crate::signal::OpticalField;

/// Manakov average of the Kerr coefficient over random birefringence.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberParams {
    /// Attenuation, dB/km.
    pub alpha_db_km: f64,
    /// Dispersion parameter D, ps/(nm·km).
    pub dispersion_ps_nm_km: f64,
    /// Dispersion slope S, ps/(nm²·km).
    pub slope_ps_nm2_km: f64,
    /// Nonlinear index n₂, m²/W.
    pub n2: f64,
    /// Effective area, m².
    pub a_eff: f64,
    /// Span length, km.
    pub length_km: f64,
    pub wavelength_m: f64,
    /// Multiplier on γ for the dual-polarization Kerr term.
    pub nonlinear_factor: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            alpha_db_km: 0.2,
            dispersion_ps_nm_km: 16.75,
            slope_ps_nm2_km: 0.075,
            n2: 2.6e-20,
            a_eff: 80e-12,
            length_km: 80.0,
            wavelength_m: 1550e-9,
            nonlinear_factor: MANAKOV_FACTOR,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db_km >= 0.0) {
            return Err(invalid("alpha_db_km", "must be non-negative"));
        }
        if !(self.a_eff > 0.0) {
            return Err(invalid("a_eff", "must be positive"));
        }
        if !(self.length_km >= 0.0) || !self.length_km.is_finite() {
            return Err(invalid("length_km", "must be non-negative and finite"));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(invalid("wavelength_m", "must be positive"));
        }
        for (n, v) in [
            ("dispersion_ps_nm_km", self.dispersion_ps_nm_km),
            ("slope_ps_nm2_km", self.slope_ps_nm2_km),
            ("n2", self.n2),
            ("nonlinear_factor", self.nonlinear_factor),
        ] {
            if !v.is_finite() {
                return Err(invalid(n, "must be finite"));
            }
        }
        Ok(())
    }

    /// Field attenuation coefficient in 1/km (power decays as `e^{−αz}`).
    pub fn alpha(&self) -> f64 {
        self.alpha_db_km * std::f64::consts::LN_10 / 10.0
    }

    /// Span loss in dB.
    pub fn span_loss_db(&self) -> f64 {
        self.alpha_db_km * self.length_km
    }

    /// β₂ in s²/km.
    pub fn beta2(&self) -> f64 {
        let d = self.dispersion_ps_nm_km * 1e-6; // s/m²
        let l = self.wavelength_m;
        -d * l * l / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT) * 1e3
    }

    /// β₃ in s³/km.
    pub fn beta3(&self) -> f64 {
        let d = self.dispersion_ps_nm_km * 1e-6;
        let s = self.slope_ps_nm2_km * 1e3; // s/m³
        let l = self.wavelength_m;
        let k = l / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT);
        k * k * (l * l * s + 2.0 * l * d) * 1e3
    }

    /// γ in 1/(W·km).
    pub fn gamma(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.n2 / (self.wavelength_m * self.a_eff) * 1e3
    }

    pub fn gamma_eff(&self) -> f64 {
        self.nonlinear_factor * self.gamma()
    }

    /// Dispersive phase per km, `β₂ω²/2 − β₃ω³/6`, on an FFT grid.
    pub fn dispersion_phase(&self, n: usize, rate: f64) -> Vec<f64> {
        let (b2, b3) = (self.beta2(), self.beta3());
        angular_frequencies(n, rate)
            .into_iter()
            .map(|w| 0.5 * b2 * w * w - b3 * w * w * w / 6.0)
            .collect()
    }

    /// Linear transfer over `len_km`, `exp(−αL/2 + j(β₂ω²/2 − β₃ω³/6)L)`.
    pub fn transfer(&self, n: usize, rate: f64, len_km: f64) -> Vec<Complex<f64>> {
        let a = (-0.5 * self.alpha() * len_km).exp();
        self.dispersion_phase(n, rate)
            .into_iter()
            .map(|p| Complex::from_polar(a, p * len_km))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepRule {
    /// Fixed step in km; rejected when the peak nonlinear phase per step
    /// exceeds `max_phase` rad.
    Fixed { dz_km: f64, max_phase: f64 },
    /// Step sized so the peak nonlinear phase per step stays at `max_phase`,
    /// never longer than `max_step_km`.
    Adaptive { max_phase: f64, max_step_km: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Fixed {
            dz_km: 0.1,
            max_phase: 0.05,
        }
    }
}

impl StepRule {
    pub fn adaptive(max_phase: f64) -> Self {
        StepRule::Adaptive {
            max_phase,
            max_step_km: 10.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepRule::Fixed { dz_km, max_phase } => dz_km > 0.0 && max_phase > 0.0,
            StepRule::Adaptive {
                max_phase,
                max_step_km,
            } => max_phase > 0.0 && max_step_km > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "step",
                "step size and phase bound must be positive",
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SsfmStats {
    pub steps: usize,
    /// Largest nonlinear phase applied in one step, rad.
    pub max_step_phase: f64,
}

fn peak_intensity<T: Real>(field: &OpticalField<T>) -> f64 {
    field
        .total_intensity()
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.as_f64()))
}

/// Symmetric split-step propagation over `fiber.length_km`.
///
/// Adjacent linear half-steps are merged, so each step costs one forward and
/// one inverse FFT per component. With `γ = 0` the result is the exact
/// linear transfer regardless of the step rule.
pub fn ssfm_propagate<T: Real>(
    field: &OpticalField<T>,
    fiber: &FiberParams,
    step: StepRule,
) -> Result<(OpticalField<T>, SsfmStats)> {
    fiber.validate()?;
    step.validate()?;
    let n = field.len();
    let rate = field.sample_rate();
    let length = fiber.length_km;
    let mut out = field.clone();
    let mut stats = SsfmStats::default();
    if length == 0.0 {
        return Ok((out, stats));
    }
    let alpha = fiber.alpha();
    let g = fiber.gamma_eff();
    let phase = fiber.dispersion_phase(n, rate);
    let mut fft = FftPair::<T>::new(n);
    let apply_linear = |bufs: &mut Vec<&mut [Complex<T>]>, h: f64| {
        let a = (-0.5 * alpha * h).exp();
        let op: Vec<Complex<T>> = phase
            .iter()
            .map(|&p| {
                let v = Complex::from_polar(a, p * h);
                Complex::new(T::lit(v.re), T::lit(v.im))
            })
            .collect();
        for b in bufs.iter_mut() {
            for (s, o) in b.iter_mut().zip(&op) {
                *s = *s * *o;
            }
        }
    };

    if g == 0.0 {
        let mut bufs = out.component_slices_mut();
        for b in bufs.iter_mut() {
            fft.forward(b);
        }
        apply_linear(&mut bufs, length);
        for b in bufs.iter_mut() {
            fft.inverse(b);
        }
        drop(bufs);
        out.noise_mut().scale_power((-alpha * length).exp());
        stats.steps = 1;
        return Ok((out, stats));
    }

    let mut z = 0.0;
    let mut peak = peak_intensity(&out);
    let choose = |peak: f64, remaining: f64| -> Result<f64> {
        let h = match step {
            StepRule::Fixed { dz_km, max_phase } => {
                let phi = g * peak * dz_km.min(remaining);
                if phi > max_phase {
                    return Err(Error::StepTooCoarse {
                        phase: phi,
                        bound: max_phase,
                    });
                }
                dz_km
            }
            StepRule::Adaptive {
                max_phase,
                max_step_km,
            } => {
                if peak > 0.0 {
                    (max_phase / (g * peak)).min(max_step_km)
                } else {
                    max_step_km
                }
            }
        };
        // absorb a sliver at the end rather than take a tiny last step
        Ok(if h >= remaining * (1.0 - 1e-9) {
            remaining
        } else {
            h
        })
    };

    let mut h = choose(peak, length)?;
    {
        let mut bufs = out.component_slices_mut();
        for b in bufs.iter_mut() {
            fft.forward(b);
        }
        apply_linear(&mut bufs, 0.5 * h);
    }
    loop {
        // to time domain at the step midpoint
        {
            let mut bufs = out.component_slices_mut();
            for b in bufs.iter_mut() {
                fft.inverse(b);
            }
        }
        let intensity = out.total_intensity();
        let mid_peak = intensity.iter().fold(0.0f64, |m, v| m.max(v.as_f64()));
        stats.max_step_phase = stats.max_step_phase.max(g * mid_peak * h);
        let k = T::lit(g * h);
        {
            let mut bufs = out.component_slices_mut();
            for b in bufs.iter_mut() {
                for (s, &i) in b.iter_mut().zip(&intensity) {
                    let (sn, cs) = (k * i).sin_cos();
                    *s = *s * Complex::new(cs, sn);
                }
                fft.forward(b);
            }
        }
        stats.steps += 1;
        z += h;
        let remaining = length - z;
        if remaining <= 1e-12 * length {
            let mut bufs = out.component_slices_mut();
            apply_linear(&mut bufs, 0.5 * h);
            for b in bufs.iter_mut() {
                fft.inverse(b);
            }
            break;
        }
        // power at the next midpoint has decayed by about e^{−αh}
        peak = mid_peak * (-alpha * h).exp();
        let next = choose(peak, remaining)?;
        let mut bufs = out.component_slices_mut();
        apply_linear(&mut bufs, 0.5 * (h + next));
        h = next;
    }
    out.noise_mut().scale_power((-alpha * length).exp());
    Ok((out, stats))
}
