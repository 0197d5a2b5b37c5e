use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::waveform::{check_pair, ComplexWaveform, JonesSignal};

pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;

/// Running account of signal power and accumulated ASE.
///
/// `ase_psd` is the white-noise power spectral density summed over both
/// polarization modes (W/Hz) at the band center. Gains and losses scale both
/// entries; noise sources add to `ase_psd`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLedger {
    pub signal_power: f64,
    pub ase_psd: f64,
    pub tracked: bool,
}

impl NoiseLedger {
    pub fn clean(signal_power: f64) -> Self {
        Self {
            signal_power,
            ase_psd: 0.0,
            tracked: true,
        }
    }

    pub fn untracked() -> Self {
        Self {
            signal_power: f64::NAN,
            ase_psd: f64::NAN,
            tracked: false,
        }
    }

    pub(crate) fn scale_power(&mut self, factor: f64) {
        self.signal_power *= factor;
        self.ase_psd *= factor;
    }
}

/// The optical field inside the fiber.
///
/// Single-layer PDM and the physical Jones model use one [`JonesSignal`];
/// the ideal four-channel CPDM abstraction carries two, the right- and
/// left-circular layers, which share the fiber and couple through the total
/// intensity in the Kerr term.
#[derive(Clone, Debug, PartialEq)]
pub struct OpticalField<T> {
    pairs: Vec<JonesSignal<T>>,
    noise: NoiseLedger,
    wavelength: f64,
}

impl<T: Real> OpticalField<T> {
    pub fn new(pairs: Vec<JonesSignal<T>>) -> Result<Self> {
        let first = pairs.first().ok_or(Error::Empty)?;
        for p in &pairs[1..] {
            check_pair(&first.x, &p.x, "OpticalField")?;
        }
        let power = pairs.iter().map(JonesSignal::power).sum();
        Ok(Self {
            pairs,
            noise: NoiseLedger::clean(power),
            wavelength: DEFAULT_WAVELENGTH,
        })
    }

    pub fn single(pair: JonesSignal<T>) -> Self {
        let power = pair.power();
        Self {
            pairs: vec![pair],
            noise: NoiseLedger::clean(power),
            wavelength: DEFAULT_WAVELENGTH,
        }
    }

    /// Field of unknown noise content; bookkeeping OSNR is unavailable.
    pub fn untracked(pairs: Vec<JonesSignal<T>>) -> Result<Self> {
        let mut f = Self::new(pairs)?;
        f.noise = NoiseLedger::untracked();
        Ok(f)
    }

    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn carrier_frequency(&self) -> f64 {
        crate::num::consts::SPEED_OF_LIGHT / self.wavelength
    }

    pub fn pairs(&self) -> &[JonesSignal<T>] {
        &self.pairs
    }

    pub fn pairs_mut(&mut self) -> &mut [JonesSignal<T>] {
        &mut self.pairs
    }

    pub fn into_pairs(self) -> Vec<JonesSignal<T>> {
        self.pairs
    }

    pub fn noise(&self) -> NoiseLedger {
        self.noise
    }

    pub(crate) fn noise_mut(&mut self) -> &mut NoiseLedger {
        &mut self.noise
    }

    pub fn sample_rate(&self) -> f64 {
        self.pairs[0].sample_rate()
    }

    pub fn len(&self) -> usize {
        self.pairs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs[0].is_empty()
    }

    /// Number of scalar components (2 per Jones pair).
    pub fn n_components(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn components(&self) -> impl Iterator<Item = &ComplexWaveform<T>> {
        self.pairs.iter().flat_map(|p| [&p.x, &p.y])
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut ComplexWaveform<T>> {
        self.pairs.iter_mut().flat_map(|p| [&mut p.x, &mut p.y])
    }

    /// Mutable sample slices of every component, in pair order (x then y).
    pub fn component_slices_mut(&mut self) -> Vec<&mut [Complex<T>]> {
        self.components_mut().map(|c| c.samples_mut()).collect()
    }

    /// Total mean power over all components.
    pub fn power(&self) -> f64 {
        self.pairs.iter().map(JonesSignal::power).sum()
    }

    /// Multiplies the field by `factor`; power (and the ledger) scale by its square.
    pub fn scale_amplitude(&mut self, factor: f64) {
        let f = T::lit(factor);
        for c in self.components_mut() {
            for s in c.samples_mut() {
                *s = *s * f;
            }
        }
        self.noise.scale_power(factor * factor);
    }

    /// Instantaneous total intensity `Σ|A_c|²` per sample.
    pub fn total_intensity(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for c in self.components() {
            for (o, s) in out.iter_mut().zip(c.samples()) {
                *o += s.norm_sqr();
            }
        }
        out
    }
}

impl<T: Real> From<JonesSignal<T>> for OpticalField<T> {
    fn from(pair: JonesSignal<T>) -> Self {
        Self::single(pair)
    }
}
