//! Polarization-diversity coherent detection.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::consts::{BOLTZMANN, ELEMENTARY_CHARGE};
use crate::num::Real;
use crate::signal::{ComplexWaveform, OpticalField};
use crate::transmitter::{
    cpdm_demux, laser, CpdmMuxModel, IqModulatorParams, LaserParams, MuxMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotodiodeParams {
    /// A/W.
    pub responsivity: f64,
    /// A.
    pub dark_current: f64,
    /// K.
    pub temperature: f64,
    /// Ω.
    pub load_resistance: f64,
    /// Hz.
    pub thermal_bandwidth: f64,
    /// Disable shot, dark and thermal noise.
    pub noiseless: bool,
}

impl Default for PhotodiodeParams {
    fn default() -> Self {
        Self {
            responsivity: 0.95,
            dark_current: 10e-9,
            temperature: 298.0,
            load_resistance: 50.0,
            thermal_bandwidth: 10e9,
            noiseless: false,
        }
    }
}

impl PhotodiodeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.responsivity > 0.0 && self.responsivity <= 1.1) {
            return Err(invalid("responsivity", "must be in (0, 1.1] A/W"));
        }
        for (n, v) in [
            ("dark_current", self.dark_current),
            ("temperature", self.temperature),
            ("load_resistance", self.load_resistance),
            ("thermal_bandwidth", self.thermal_bandwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(n, "must be positive"));
            }
        }
        Ok(())
    }

    /// Current-noise variance per quadrature of one balanced pair (A²), with
    /// `lo_power` and `sig_power` the optical powers reaching the hybrid:
    /// shot `2q(R(P_LO+P_s)/2 + 2I_d)B` plus thermal `4kTB/R_L`.
    pub fn noise_variance(&self, lo_power: f64, sig_power: f64) -> f64 {
        let b = self.thermal_bandwidth;
        let shot = 2.0
            * ELEMENTARY_CHARGE
            * (self.responsivity * (lo_power + sig_power) / 2.0 + 2.0 * self.dark_current)
            * b;
        let thermal = 4.0 * BOLTZMANN * self.temperature * b / self.load_resistance;
        shot + thermal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub lo: LaserParams,
    pub photodiode: PhotodiodeParams,
    pub tia_gain_db: f64,
    /// Receiver hybrid I/Q imbalance (DC offsets ignored).
    pub hybrid: IqModulatorParams,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            lo: LaserParams::default(),
            photodiode: PhotodiodeParams::default(),
            tia_gain_db: 20.0,
            hybrid: IqModulatorParams::default(),
        }
    }
}

/// Electrical I+jQ waveforms of the detection branches, in the order
/// RCP-H, RCP-V, LCP-H, LCP-V (two branches in PDM mode).
#[derive(Clone, Debug, PartialEq)]
pub struct FrontendOutput<T> {
    pub branches: Vec<ComplexWaveform<T>>,
    pub mode: MuxMode,
}

impl<T: Real> FrontendOutput<T> {
    pub fn sample_rate(&self) -> f64 {
        self.branches[0].sample_rate()
    }

    pub fn len(&self) -> usize {
        self.branches[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches[0].is_empty()
    }
}

/// Detects every branch against its share of the LO.
///
/// Each balanced 90° hybrid yields `I + jQ = G_TIA · R · s · conj(E_LO)`
/// with the LO power split evenly over the branches. The LO laser
/// `frequency_offset_hz` is the intermediate frequency: the output rotates
/// at `+Δf`.
pub fn coherent_detect<T: Real>(
    field: &OpticalField<T>,
    cfg: &FrontendConfig,
    mux: &CpdmMuxModel,
    seed: u64,
) -> Result<FrontendOutput<T>> {
    cfg.photodiode.validate()?;
    if !cfg.tia_gain_db.is_finite() {
        return Err(invalid("tia_gain_db", "must be finite"));
    }
    let n = field.len();
    let rate = field.sample_rate();
    let lo_params = LaserParams {
        frequency_offset_hz: -cfg.lo.frequency_offset_hz,
        ..cfg.lo
    };
    let lo: ComplexWaveform<f64> = laser(&lo_params, n, rate, seed ^ 0x10)?;
    let lo_power = lo_params.power_watt();
    if !(lo_power > 0.0) {
        return Err(invalid("lo.power_dbm", "LO power must be positive"));
    }
    let tribs = cpdm_demux(field, mux)?;
    let n_branch = if mux.mode == MuxMode::Pdm2 { 2 } else { 4 };
    let branch_lo = lo_power / n_branch as f64;
    // the LO follows the same 1/n split as the signal branches
    let lo_scale = (1.0 / n_branch as f64).sqrt();
    let pd = &cfg.photodiode;
    let gain = 10f64.powf(cfg.tia_gain_db / 20.0);
    let k = pd.responsivity * gain * lo_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut branches = Vec::with_capacity(n_branch);
    for s in tribs.as_array().into_iter().take(n_branch) {
        let sig_power = s.power();
        let sigma = if pd.noiseless {
            0.0
        } else {
            pd.noise_variance(branch_lo, sig_power).sqrt() * gain
        };
        let mut out: Vec<Complex<T>> = s
            .samples()
            .iter()
            .zip(lo.samples())
            .map(|(&v, l)| {
                let p = Complex::new(v.re.as_f64(), v.im.as_f64()) * l.conj() * k;
                Complex::new(T::lit(p.re), T::lit(p.im))
            })
            .collect();
        let hybrid = IqModulatorParams {
            dc_offset_i: 0.0,
            dc_offset_q: 0.0,
            ..cfg.hybrid
        };
        hybrid.apply(&mut out);
        if sigma > 0.0 {
            for v in out.iter_mut() {
                let ni = sigma * f64::std_normal(&mut rng);
                let nq = sigma * f64::std_normal(&mut rng);
                *v += Complex::new(T::lit(ni), T::lit(nq));
            }
        }
        branches.push(ComplexWaveform::new(out, rate)?);
    }
    if branches.is_empty() {
        return Err(Error::Empty);
    }
    Ok(FrontendOutput {
        branches,
        mode: mux.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fft::{bin_frequency, fft, peak_bin};
    use crate::signal::JonesSignal;
    use crate::transmitter::{transmit, TransmitterConfig};

    fn unit_field(n: usize, rate: f64) -> OpticalField<f64> {
        let one = ComplexWaveform::new(vec![Complex::new(1.0, 0.0); n], rate).unwrap();
        OpticalField::new(vec![
            JonesSignal::new(one.clone(), one.clone()).unwrap(),
            JonesSignal::new(one.clone(), one).unwrap(),
        ])
        .unwrap()
    }

    fn quiet() -> FrontendConfig {
        FrontendConfig {
            lo: LaserParams {
                linewidth_hz: 0.0,
                ..Default::default()
            },
            photodiode: PhotodiodeParams {
                noiseless: true,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_output_is_scaled_field() {
        let f = unit_field(32, 100e9);
        let out = coherent_detect(&f, &quiet(), &CpdmMuxModel::ideal4(), 1).unwrap();
        // R · G · sqrt(P_LO / 4) with P_LO = 100 mW, G = 10
        let want = 0.95 * 10.0 * (0.1f64 / 4.0).sqrt();
        for b in &out.branches {
            for v in b.samples() {
                assert!((v - Complex::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dark_and_thermal_floor() {
        let n = 1_000_000;
        let z = ComplexWaveform::<f64>::zeros(n, 100e9).unwrap();
        let f = OpticalField::single(JonesSignal::new(z.clone(), z).unwrap());
        let mut cfg = quiet();
        cfg.photodiode.noiseless = false;
        cfg.lo.power_dbm = -300.0; // no LO shot noise
        cfg.tia_gain_db = 0.0;
        let out = coherent_detect(&f, &cfg, &CpdmMuxModel::pdm2(), 3).unwrap();
        let pd = cfg.photodiode;
        let want = pd.noise_variance(0.0, 0.0);
        let s = out.branches[0].samples();
        let var_i = s.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        assert!((var_i / want - 1.0).abs() < 0.05, "{}", var_i / want);
    }

    #[test]
    fn shot_noise_scales_with_lo_power() {
        let n = 200_000;
        let z = ComplexWaveform::<f64>::zeros(n, 100e9).unwrap();
        let f = OpticalField::single(JonesSignal::new(z.clone(), z).unwrap());
        let mut cfg = quiet();
        cfg.photodiode.noiseless = false;
        cfg.photodiode.dark_current = 1e-15;
        cfg.photodiode.temperature = 1e-9;
        cfg.tia_gain_db = 0.0;
        let var = |dbm: f64| {
            let mut c = cfg.clone();
            c.lo.power_dbm = dbm;
            let o = coherent_detect(&f, &c, &CpdmMuxModel::pdm2(), 5).unwrap();
            o.branches[0].power()
        };
        let r = var(20.0) / var(10.0);
        assert!((r / 10.0 - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn lo_offset_rotates_output() {
        let n = 4096;
        let rate = 102.4e9;
        let f = unit_field(n, rate);
        let mut cfg = quiet();
        cfg.lo.frequency_offset_hz = 500e6;
        let out = coherent_detect(&f, &cfg, &CpdmMuxModel::ideal4(), 1).unwrap();
        let spec = fft(out.branches[0].samples());
        let fpk = bin_frequency(peak_bin(&spec), n, rate);
        assert!((fpk - 500e6).abs() <= rate / n as f64, "{fpk}");
    }

    #[test]
    fn ideal4_recovers_tributaries_up_to_a_scalar() {
        let cfg_tx = TransmitterConfig {
            sps: 4,
            ..Default::default()
        };
        let tx = transmit::<f64>(&cfg_tx, &CpdmMuxModel::ideal4(), 256, 2).unwrap();
        let out = coherent_detect(&tx.field, &quiet(), &CpdmMuxModel::ideal4(), 1).unwrap();
        let tribs = cpdm_demux(&tx.field, &CpdmMuxModel::ideal4()).unwrap();
        for (b, t) in out.branches.iter().zip(tribs.as_array()) {
            let num: Complex<f64> = b
                .samples()
                .iter()
                .zip(t.samples())
                .map(|(u, v)| u * v.conj())
                .sum();
            let den = (b.power() * t.power()).sqrt() * b.len() as f64;
            assert!(num.norm() / den > 1.0 - 1e-9);
        }
    }

    #[test]
    fn rejects_zero_lo() {
        let f = unit_field(8, 1e9);
        let mut cfg = quiet();
        cfg.lo.power_dbm = f64::NEG_INFINITY;
        assert!(coherent_detect(&f, &cfg, &CpdmMuxModel::ideal4(), 0).is_err());
    }
}
