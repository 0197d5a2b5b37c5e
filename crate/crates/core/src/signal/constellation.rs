//! 8-QAM constellations with 3-bit labels.
//!
//! The default geometry is the two-ring "star" 8-QAM: an inner square at
//! 0°/90°/180°/270° and an outer square rotated by 45°, with the ring ratio
//! `(1 + √3)/√2` that makes every inner–inner and inner–outer nearest
//! distance equal. It has fourfold rotational symmetry, which the blind
//! carrier-recovery stages rely on. A rectangular `{±1, ±3} + j{±1}` layout
//! is available for comparison; it is only twofold symmetric.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::bits::BitStream;
use crate::signal::waveform::ComplexWaveform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Star,
    Rectangular,
}

const GRAY2: [u8; 4] = [0b00, 0b01, 0b11, 0b10];

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation8Qam<T> {
    /// Points in geometric order.
    pub points: [Complex<T>; 8],
    /// 3-bit label of `points[i]`.
    pub labels: [u8; 8],
    geometry: Geometry,
    /// `by_label[l]` is the index into `points` carrying label `l`.
    by_label: [usize; 8],
}

impl<T: Real> Constellation8Qam<T> {
    pub fn new(geometry: Geometry) -> Self {
        let mut pts = [Complex::new(0.0f64, 0.0); 8];
        let mut labels = [0u8; 8];
        match geometry {
            Geometry::Star => {
                let r_out = (1.0 + 3f64.sqrt()) / 2f64.sqrt();
                for k in 0..4 {
                    let a = k as f64 * std::f64::consts::FRAC_PI_2;
                    pts[k] = Complex::from_polar(1.0, a);
                    labels[k] = GRAY2[k];
                    pts[4 + k] = Complex::from_polar(r_out, a + std::f64::consts::FRAC_PI_4);
                    labels[4 + k] = 0b100 | GRAY2[k];
                }
            }
            Geometry::Rectangular => {
                for (k, x) in [-3.0, -1.0, 1.0, 3.0].into_iter().enumerate() {
                    pts[k] = Complex::new(x, 1.0);
                    labels[k] = GRAY2[k];
                    pts[4 + k] = Complex::new(x, -1.0);
                    labels[4 + k] = 0b100 | GRAY2[k];
                }
            }
        }
        let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / 8.0;
        let scale = energy.sqrt().recip();
        let points = pts.map(|p| Complex::new(T::lit(p.re * scale), T::lit(p.im * scale)));
        let mut by_label = [0usize; 8];
        for (i, &l) in labels.iter().enumerate() {
            by_label[l as usize] = i;
        }
        Self {
            points,
            labels,
            geometry,
            by_label,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn point(&self, label: u8) -> Complex<T> {
        self.points[self.by_label[label as usize]]
    }

    /// Rotational symmetry order of the point set.
    pub fn symmetry_order(&self) -> usize {
        match self.geometry {
            Geometry::Star => 4,
            Geometry::Rectangular => 2,
        }
    }

    /// Distinct ring radii, ascending.
    pub fn radii(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.points.iter().map(|p| p.norm().as_f64()).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        r
    }

    /// Godard constant `E|s|⁴ / E|s|²` used as the constant-modulus target.
    pub fn modulus_constant(&self) -> f64 {
        let m2: f64 = self.points.iter().map(|p| p.norm_sqr().as_f64()).sum();
        let m4: f64 = self
            .points
            .iter()
            .map(|p| p.norm_sqr().as_f64().powi(2))
            .sum();
        m4 / m2
    }

    /// Minimum-distance decision; ties (equal within a few ulps) go to the
    /// lower label.
    #[inline]
    pub fn decide(&self, s: Complex<T>) -> u8 {
        let tol = T::epsilon() * T::lit(16.0);
        let mut best = 0u8;
        let mut best_d = (s - self.point(0)).norm_sqr();
        for l in 1..8u8 {
            let d = (s - self.point(l)).norm_sqr();
            if d < best_d - tol * best_d {
                best = l;
                best_d = d;
            }
        }
        best
    }

    /// Squared distance to the nearest point.
    #[inline]
    pub fn nearest_distance_sqr(&self, s: Complex<T>) -> T {
        self.points
            .iter()
            .map(|p| (s - *p).norm_sqr())
            .fold(T::infinity(), T::min)
    }
}

impl<T: Real> Default for Constellation8Qam<T> {
    fn default() -> Self {
        Self::new(Geometry::Star)
    }
}

/// Maps each 3-bit group (MSB first) to one symbol at `symbol_rate`.
pub fn map_8qam<T: Real>(
    bits: &BitStream,
    c: &Constellation8Qam<T>,
    symbol_rate: f64,
) -> Result<ComplexWaveform<T>> {
    let b = bits.bits();
    if b.len() % 3 != 0 {
        return Err(Error::BitLength(b.len()));
    }
    let symbols = b
        .chunks_exact(3)
        .map(|g| c.point((g[0] << 2) | (g[1] << 1) | g[2]))
        .collect();
    ComplexWaveform::new(symbols, symbol_rate)
}

/// Hard minimum-Euclidean-distance demapping.
pub fn demap_8qam<T: Real>(symbols: &[Complex<T>], c: &Constellation8Qam<T>) -> BitStream {
    let mut bits = Vec::with_capacity(3 * symbols.len());
    for &s in symbols {
        let l = c.decide(s);
        bits.extend_from_slice(&[(l >> 2) & 1, (l >> 1) & 1, l & 1]);
    }
    BitStream::from_bits(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::bits::{generate_bits, BitGenerator};

    fn both() -> [Constellation8Qam<f64>; 2] {
        [
            Constellation8Qam::new(Geometry::Star),
            Constellation8Qam::new(Geometry::Rectangular),
        ]
    }

    #[test]
    fn unit_energy_two_radii_label_permutation() {
        for c in both() {
            let e: f64 = c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 8.0;
            assert!((e - 1.0).abs() < 1e-12);
            assert_eq!(c.radii().len(), 2);
            let mut l = c.labels.to_vec();
            l.sort();
            assert_eq!(l, (0..8).collect::<Vec<u8>>());
        }
    }

    #[test]
    fn star_nearest_neighbours_are_equidistant_and_quasi_gray() {
        let c = Constellation8Qam::<f64>::new(Geometry::Star);
        let mut dmin = f64::INFINITY;
        for i in 0..8 {
            for j in 0..i {
                dmin = dmin.min((c.points[i] - c.points[j]).norm());
            }
        }
        for i in 0..8 {
            for j in 0..i {
                let d = (c.points[i] - c.points[j]).norm();
                if d < dmin * (1.0 + 1e-9) {
                    let diff = (c.labels[i] ^ c.labels[j]).count_ones();
                    assert!(diff <= 2, "neighbours {i},{j} differ in {diff} bits");
                }
            }
        }
    }

    #[test]
    fn exhaustive_symbols_distinct() {
        for c in both() {
            let bits: Vec<u8> = (0..8u8)
                .flat_map(|l| [(l >> 2) & 1, (l >> 1) & 1, l & 1])
                .collect();
            let s = map_8qam(&BitStream::from_bits(bits), &c, 1.0).unwrap();
            for i in 0..8 {
                for j in 0..i {
                    assert!((s.samples()[i] - s.samples()[j]).norm() > 0.1);
                }
            }
        }
    }

    #[test]
    fn all_zero_bits_repeat_label_zero() {
        let c = Constellation8Qam::<f64>::default();
        let s = map_8qam(&BitStream::from_bits(vec![0; 12]), &c, 1.0).unwrap();
        assert!(s.samples().iter().all(|&x| x == c.point(0)));
    }

    #[test]
    fn rejects_partial_symbol() {
        let c = Constellation8Qam::<f64>::default();
        assert!(matches!(
            map_8qam(&BitStream::from_bits(vec![0; 7]), &c, 1.0),
            Err(Error::BitLength(7))
        ));
    }

    #[test]
    fn round_trip_random_blocks() {
        for c in both() {
            for seed in 0..64 {
                let b = generate_bits(3 * 64, seed, BitGenerator::Uniform);
                let s = map_8qam(&b, &c, 1.0).unwrap();
                assert_eq!(demap_8qam(s.samples(), &c).bits(), b.bits());
            }
        }
    }

    #[test]
    fn midpoint_tie_breaks_to_lower_label() {
        let c = Constellation8Qam::<f64>::default();
        // inner points with labels 0b00 and 0b01 are adjacent
        let (a, b) = (c.point(0), c.point(1));
        let mid = (a + b) * 0.5;
        assert_eq!(c.decide(mid), 0);
        // symmetric: swap roles, still lowest label among tied
        let (p, q) = (c.point(3), c.point(2));
        assert_eq!(c.decide((p + q) * 0.5), 2);
    }
}
