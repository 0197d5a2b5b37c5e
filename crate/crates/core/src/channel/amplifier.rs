use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{complex_gaussian, consts::PLANCK, db_to_linear, Real};
use crate::signal::OpticalField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierParams {
    /// Gain in dB; `None` matches the span loss.
    pub gain_db: Option<f64>,
    pub noise_figure_db: f64,
    /// Spontaneous-emission factor used instead of the one implied by the
    /// noise figure.
    pub n_sp: Option<f64>,
    /// Skip ASE generation (gain only).
    pub noiseless: bool,
    /// Accept noise figures below the 3-dB quantum limit.
    pub allow_sub_quantum_nf: bool,
    pub seed: u64,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        Self {
            gain_db: None,
            noise_figure_db: 4.0,
            n_sp: None,
            noiseless: false,
            allow_sub_quantum_nf: false,
            seed: 0,
        }
    }
}

impl AmplifierParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gain_db {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(invalid("gain_db", "must be finite and ≥ 0"));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return Err(invalid("noise_figure_db", "must be finite"));
        }
        if self.noise_figure_db < 3.0 && !self.allow_sub_quantum_nf && self.n_sp.is_none() {
            return Err(invalid(
                "noise_figure_db",
                format!(
                    "{} dB is below the 3 dB quantum limit (set allow_sub_quantum_nf to override)",
                    self.noise_figure_db
                ),
            ));
        }
        if let Some(n) = self.n_sp {
            if !(n >= 0.0) {
                return Err(invalid("n_sp", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Same parameters with the gain fixed, loss-matched if unset.
    pub fn resolved(&self, span_loss_db: f64) -> Self {
        Self {
            gain_db: Some(self.gain_db.unwrap_or(span_loss_db)),
            ..*self
        }
    }

    /// `n_sp = NF·G / (2(G−1))`, or the explicit override.
    pub fn spontaneous_factor(&self, gain_lin: f64) -> f64 {
        match self.n_sp {
            Some(n) => n,
            None if gain_lin > 1.0 => {
                db_to_linear(self.noise_figure_db) * gain_lin / (2.0 * (gain_lin - 1.0))
            }
            None => 0.0,
        }
    }

    /// ASE power spectral density per polarization mode, W/Hz.
    pub fn ase_psd_per_mode(&self, gain_lin: f64, carrier_hz: f64) -> f64 {
        (gain_lin - 1.0).max(0.0) * PLANCK * carrier_hz * self.spontaneous_factor(gain_lin)
    }
}

/// Adds white circular-Gaussian noise of total (both-mode) PSD `psd` W/Hz,
/// split evenly over the field components.
pub(crate) fn add_white_noise<T: Real>(
    field: &mut OpticalField<T>,
    psd: f64,
    rng: &mut ChaCha8Rng,
) {
    let var = T::lit(psd * field.sample_rate() / field.n_components() as f64);
    for c in field.components_mut() {
        for s in c.samples_mut() {
            *s += complex_gaussian(rng, var);
        }
    }
    field.noise_mut().ase_psd += psd;
}

/// Erbium-doped amplifier: power gain `G` plus ASE of PSD
/// `(G−1)·h·ν·n_sp` per polarization mode over the whole simulation band.
pub fn edfa<T: Real>(field: &OpticalField<T>, p: &AmplifierParams) -> Result<OpticalField<T>> {
    p.validate()?;
    let g_db = p
        .gain_db
        .ok_or_else(|| invalid("gain_db", "unresolved; call AmplifierParams::resolved"))?;
    let g = db_to_linear(g_db);
    let mut out = field.clone();
    out.scale_amplitude(g.sqrt());
    if !p.noiseless {
        let s = p.ase_psd_per_mode(g, field.carrier_frequency());
        if s > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            add_white_noise(&mut out, 2.0 * s, &mut rng);
        }
    }
    Ok(out)
}

/// OSNR from the noise ledger, dB in `ref_bw`.
pub fn ledger_osnr_db<T: Real>(field: &OpticalField<T>, ref_bw: f64) -> Result<f64> {
    let n = field.noise();
    if !n.tracked {
        return Err(Error::NoiseUntracked);
    }
    Ok(10.0 * (n.signal_power / (n.ase_psd * ref_bw)).log10())
}

/// Adds white ASE until the OSNR in `ref_bw` equals `target_osnr_db`.
///
/// An infinite target returns the field unchanged. The noise realization is
/// a function of `seed` only, so sweeps over the target with a fixed seed
/// scale one noise pattern.
pub fn ase_load<T: Real>(
    field: &OpticalField<T>,
    target_osnr_db: f64,
    ref_bw: f64,
    seed: u64,
) -> Result<OpticalField<T>> {
    if !(ref_bw > 0.0) {
        return Err(invalid("ref_bw", "must be positive"));
    }
    if target_osnr_db == f64::INFINITY {
        return Ok(field.clone());
    }
    if !target_osnr_db.is_finite() {
        return Err(invalid("target_osnr_db", "must be finite or +inf"));
    }
    let n = field.noise();
    if !n.tracked {
        return Err(Error::NoiseUntracked);
    }
    if !(n.signal_power > 0.0) {
        return Err(Error::ZeroPower);
    }
    let target_psd = n.signal_power / (db_to_linear(target_osnr_db) * ref_bw);
    let deficit = target_psd - n.ase_psd;
    if deficit < -1e-12 * target_psd {
        return Err(Error::OsnrFloor {
            target: target_osnr_db,
            current: ledger_osnr_db(field, ref_bw)?,
        });
    }
    let mut out = field.clone();
    if deficit > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        add_white_noise(&mut out, deficit, &mut rng);
    }
    Ok(out)
}
