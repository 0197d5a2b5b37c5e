//! Analog Bessel low-pass applied on the FFT grid.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::fft::{bin_frequency, FftPair};

/// Coefficients `a_k` (ascending powers) of the reverse Bessel polynomial
/// `θ_n(s) = Σ (2n−k)! / (2^{n−k}·k!·(n−k)!) · s^k`.
pub fn reverse_bessel(order: usize) -> Vec<f64> {
    let fact = |m: usize| (1..=m).map(|v| v as f64).product::<f64>();
    (0..=order)
        .map(|k| fact(2 * order - k) / (2f64.powi((order - k) as i32) * fact(k) * fact(order - k)))
        .collect()
}

fn eval(coef: &[f64], s: Complex<f64>) -> Complex<f64> {
    coef.iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Analog prototype `H(s) = θ(0)/θ(s/ω₀)` with `ω₀` chosen so that
/// `|H(j2π·bw)| = 1/√2`.
#[derive(Clone, Debug)]
pub struct BesselResponse {
    coef: Vec<f64>,
    omega0: f64,
}

impl BesselResponse {
    pub fn new(order: usize, bw_3db: f64) -> Result<Self> {
        if order == 0 || order > 12 {
            return Err(invalid("bessel.order", "must be in 1..=12"));
        }
        if !(bw_3db > 0.0) {
            return Err(invalid("bessel.bw", "must be positive"));
        }
        let coef = reverse_bessel(order);
        let a0 = coef[0];
        let mag2 = |x: f64| (a0 / eval(&coef, Complex::new(0.0, x)).norm()).powi(2);
        let (mut lo, mut hi) = (0.0, 1.0);
        while mag2(hi) > 0.5 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mag2(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x3 = 0.5 * (lo + hi);
        Ok(Self {
            omega0: 2.0 * std::f64::consts::PI * bw_3db / x3,
            coef,
        })
    }

    pub fn at(&self, f: f64) -> Complex<f64> {
        let s = Complex::new(0.0, 2.0 * std::f64::consts::PI * f / self.omega0);
        self.coef[0] / eval(&self.coef, s)
    }
}

/// Filters every buffer in place; `bw_3db` must lie below Nyquist.
pub fn bessel_filter<T: Real>(
    bufs: &mut [Vec<Complex<T>>],
    rate: f64,
    order: usize,
    bw_3db: f64,
) -> Result<()> {
    if bw_3db >= 0.5 * rate {
        return Err(Error::AboveNyquist {
            bandwidth: bw_3db,
            limit: 0.5 * rate,
        });
    }
    let resp = BesselResponse::new(order, bw_3db)?;
    let Some(n) = bufs.first().map(Vec::len) else {
        return Ok(());
    };
    let h: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let v = resp.at(bin_frequency(k, n, rate));
            Complex::new(T::lit(v.re), T::lit(v.im))
        })
        .collect();
    let mut fft = FftPair::new(n);
    for b in bufs.iter_mut() {
        fft.filter(b, &h);
    }
    Ok(())
}
