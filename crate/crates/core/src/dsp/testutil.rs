//! Test vectors shared by the stage tests.

use num_complex::Complex;

use crate::signal::{generate_bits, map_8qam, BitGenerator, Constellation8Qam};
use crate::transmitter::{shape_pulses, PulseShape};

pub fn symbols(n_sym: usize, seed: u64) -> Vec<Complex<f64>> {
    let c = Constellation8Qam::<f64>::default();
    let b = generate_bits(3 * n_sym, seed, BitGenerator::Uniform);
    map_8qam(&b, &c, 1.0).unwrap().samples().to_vec()
}

/// Periodic RRC(0.2) waveform at `sps`.
pub fn shaped(s: &[Complex<f64>], sps: usize) -> Vec<Complex<f64>> {
    shape_pulses(s, sps, PulseShape::Rrc { rolloff: 0.2 }).unwrap()
}

/// Least-squares complex gain taking `y` onto `r`.
pub fn ls_gain(y: &[Complex<f64>], r: &[Complex<f64>]) -> Complex<f64> {
    let num: Complex<f64> = y.iter().zip(r).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = y.iter().map(|a| a.norm_sqr()).sum();
    num / den
}

/// EVM in dB of `y` against `r` after the LS gain.
pub fn evm_db(y: &[Complex<f64>], r: &[Complex<f64>]) -> f64 {
    let g = ls_gain(y, r);
    let e: f64 = y.iter().zip(r).map(|(a, b)| (a * g - b).norm_sqr()).sum();
    let p: f64 = r.iter().map(|b| b.norm_sqr()).sum();
    10.0 * (e / p).log10()
}

/// Symbol errors of `y` against `r` after the LS gain.
pub fn symbol_errors(y: &[Complex<f64>], r: &[Complex<f64>]) -> usize {
    let c = Constellation8Qam::<f64>::default();
    let g = ls_gain(y, r);
    y.iter()
        .zip(r)
        .filter(|(a, b)| c.decide(**a * g) != c.decide(**b))
        .count()
}

pub fn to_f32(x: &[Complex<f64>]) -> Vec<Complex<f32>> {
    x.iter()
        .map(|v| Complex::new(v.re as f32, v.im as f32))
        .collect()
}
