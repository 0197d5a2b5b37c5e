use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::num::{mean_power, Real};

/// Uniformly sampled complex baseband waveform.
///
/// Optical fields carry `sqrt(W)` per sample, electrical branches carry volts
/// or amperes. The container only checks structural invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexWaveform<T> {
    samples: Vec<Complex<T>>,
    sample_rate: f64,
    center_frequency_offset: f64,
}

impl<T: Real> ComplexWaveform<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(invalid(
                "sample_rate",
                format!("{sample_rate} must be positive"),
            ));
        }
        if samples.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
            center_frequency_offset: 0.0,
        })
    }

    /// Skips the finiteness scan. For internal stages whose output is finite
    /// whenever the input is.
    pub(crate) fn from_parts(samples: Vec<Complex<T>>, sample_rate: f64) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate > 0.0);
        Self {
            samples,
            sample_rate,
            center_frequency_offset: 0.0,
        }
    }

    pub fn with_center_frequency_offset(mut self, offset_hz: f64) -> Self {
        self.center_frequency_offset = offset_hz;
        self
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![Complex::new(T::zero(), T::zero()); len], sample_rate)
    }

    #[inline]
    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    #[inline]
    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    #[inline]
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    #[inline]
    pub fn center_frequency_offset(&self) -> f64 {
        self.center_frequency_offset
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean `|x|²`.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Same metadata, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<Complex<T>>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            center_frequency_offset: self.center_frequency_offset,
        }
    }

    pub fn scaled(mut self, factor: T) -> Self {
        for s in &mut self.samples {
            *s = *s * factor;
        }
        self
    }

    /// Converts the sample type, e.g. `f64` to `f32` for storage.
    pub fn cast<U: Real>(&self) -> ComplexWaveform<U> {
        ComplexWaveform {
            samples: self
                .samples
                .iter()
                .map(|s| Complex::new(U::lit(s.re.as_f64()), U::lit(s.im.as_f64())))
                .collect(),
            sample_rate: self.sample_rate,
            center_frequency_offset: self.center_frequency_offset,
        }
    }
}

/// Two orthogonal linear-polarization components on a fixed H/V basis.
#[derive(Clone, Debug, PartialEq)]
pub struct JonesSignal<T> {
    pub x: ComplexWaveform<T>,
    pub y: ComplexWaveform<T>,
}

impl<T: Real> JonesSignal<T> {
    pub fn new(x: ComplexWaveform<T>, y: ComplexWaveform<T>) -> Result<Self> {
        check_pair(&x, &y, "JonesSignal")?;
        Ok(Self { x, y })
    }

    pub fn sample_rate(&self) -> f64 {
        self.x.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Total mean power, x plus y.
    pub fn power(&self) -> f64 {
        self.x.power() + self.y.power()
    }

    /// Applies a 2×2 Jones matrix (row-major) sample by sample.
    pub fn transform(&mut self, m: [[Complex<T>; 2]; 2]) {
        for (a, b) in self
            .x
            .samples_mut()
            .iter_mut()
            .zip(self.y.samples_mut().iter_mut())
        {
            let (u, v) = (*a, *b);
            *a = m[0][0] * u + m[0][1] * v;
            *b = m[1][0] * u + m[1][1] * v;
        }
    }
}

/// The four data tributaries: H and V arms of the right- and left-circular
/// branches.
#[derive(Clone, Debug, PartialEq)]
pub struct TributarySet<T> {
    pub rcp_h: ComplexWaveform<T>,
    pub rcp_v: ComplexWaveform<T>,
    pub lcp_h: ComplexWaveform<T>,
    pub lcp_v: ComplexWaveform<T>,
}

impl<T: Real> TributarySet<T> {
    pub const NAMES: [&'static str; 4] = ["rcp_h", "rcp_v", "lcp_h", "lcp_v"];

    pub fn new(
        rcp_h: ComplexWaveform<T>,
        rcp_v: ComplexWaveform<T>,
        lcp_h: ComplexWaveform<T>,
        lcp_v: ComplexWaveform<T>,
    ) -> Result<Self> {
        check_pair(&rcp_h, &rcp_v, "TributarySet")?;
        check_pair(&rcp_h, &lcp_h, "TributarySet")?;
        check_pair(&rcp_h, &lcp_v, "TributarySet")?;
        Ok(Self {
            rcp_h,
            rcp_v,
            lcp_h,
            lcp_v,
        })
    }

    pub fn from_array(a: [ComplexWaveform<T>; 4]) -> Result<Self> {
        let [rcp_h, rcp_v, lcp_h, lcp_v] = a;
        Self::new(rcp_h, rcp_v, lcp_h, lcp_v)
    }

    pub fn as_array(&self) -> [&ComplexWaveform<T>; 4] {
        [&self.rcp_h, &self.rcp_v, &self.lcp_h, &self.lcp_v]
    }

    pub fn into_array(self) -> [ComplexWaveform<T>; 4] {
        [self.rcp_h, self.rcp_v, self.lcp_h, self.lcp_v]
    }

    pub fn len(&self) -> usize {
        self.rcp_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rcp_h.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.rcp_h.sample_rate()
    }
}

pub(crate) fn check_pair<T: Real>(
    a: &ComplexWaveform<T>,
    b: &ComplexWaveform<T>,
    context: &'static str,
) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            context,
            left: a.len(),
            right: b.len(),
        });
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::RateMismatch {
            context,
            left: a.sample_rate(),
            right: b.sample_rate(),
        });
    }
    Ok(())
}
