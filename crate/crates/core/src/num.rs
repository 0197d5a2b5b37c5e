//! Scalar abstraction shared by every numeric stage.
//!
//! Waveform math is written once against [`Real`] and instantiated for `f64`
//! (the default used by the simulator) and `f32` (half the memory for long
//! sweeps). Physical parameters stay in `f64` and are cast at the boundary.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar usable for FFTs, random draws and complex math.
pub trait Real:
    rustfft::FftNum
    + Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Draws one sample of a zero-mean, unit-variance real Gaussian.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` constant or parameter into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f64 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Real for f32 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
#[inline]
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let sigma = (variance / T::lit(2.0)).sqrt();
    Complex::new(T::std_normal(rng) * sigma, T::std_normal(rng) * sigma)
}

/// `e^{j·phase}` for a real phase.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

#[inline]
pub fn watt_to_dbm(w: f64) -> f64 {
    linear_to_db(w / 1e-3)
}

/// Mean of `|x|²` over a slice, accumulated in `f64`.
pub fn mean_power<T: Real>(x: &[Complex<T>]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr().as_f64()).sum::<f64>() / x.len() as f64
}

/// Relative RMS difference `‖a − b‖ / ‖b‖`.
pub fn relative_rms<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_rms on unequal lengths");
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).norm_sqr().as_f64())
        .sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr().as_f64()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Physical constants in SI units.
pub mod consts {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}
