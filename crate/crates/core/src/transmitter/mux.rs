//! Polarization optics of the CPDM transmitter and its mirror image at the
//! receiver.
//!
//! Four tributaries cannot be mutually orthogonal in a two-dimensional Jones
//! space. `Ideal4` keeps them as four logical channels (two Jones pairs that
//! share the fiber); `PhysicalJones` maps them through quarter-waveplate,
//! PBC and CPBC optics into one Jones vector, so the round trip has rank 2.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::{ComplexWaveform, JonesSignal, OpticalField, TributarySet};

type C64 = Complex<f64>;
pub type Jones2 = [[C64; 2]; 2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuxMode {
    #[default]
    Ideal4,
    PhysicalJones,
    /// Plain dual-polarization baseline: `rcp_h`/`rcp_v` on H/V, the LCP
    /// tributaries are dropped.
    Pdm2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpdmMuxModel {
    pub mode: MuxMode,
    /// Columns are the Jones images of rcp_h, rcp_v, lcp_h, lcp_v, before the
    /// `1/√2` combiner loss.
    pub tx_map: [[C64; 4]; 2],
    pub waveplate_angle: f64,
}

fn rot(t: f64) -> Jones2 {
    let (s, c) = t.sin_cos();
    [
        [C64::new(c, 0.0), C64::new(s, 0.0)],
        [C64::new(-s, 0.0), C64::new(c, 0.0)],
    ]
}

fn mul(a: &Jones2, b: &Jones2) -> Jones2 {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

/// Quarter-wave plate with its fast axis at `theta` radians from H.
pub fn quarter_waveplate(theta: f64) -> Jones2 {
    let retarder = [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
    ];
    mul(&rot(-theta), &mul(&retarder, &rot(theta)))
}

impl CpdmMuxModel {
    pub fn new(mode: MuxMode) -> Self {
        let theta = std::f64::consts::FRAC_PI_4;
        let r = quarter_waveplate(-theta);
        let l = quarter_waveplate(theta);
        // column k = plate · {H, V}
        let tx_map = [
            [r[0][0], r[0][1], l[0][0], l[0][1]],
            [r[1][0], r[1][1], l[1][0], l[1][1]],
        ];
        Self {
            mode,
            tx_map,
            waveplate_angle: theta,
        }
    }

    pub fn ideal4() -> Self {
        Self::new(MuxMode::Ideal4)
    }

    pub fn physical() -> Self {
        Self::new(MuxMode::PhysicalJones)
    }

    pub fn pdm2() -> Self {
        Self::new(MuxMode::Pdm2)
    }

    /// Receiver-side map from a Jones vector to the four detection branches:
    /// `(1/√2)·tx_mapᴴ`.
    pub fn rx_map(&self) -> [[C64; 2]; 4] {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = [[C64::new(0.0, 0.0); 2]; 4];
        for (b, row) in m.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v = self.tx_map[p][b].conj() * k;
            }
        }
        m
    }

    /// End-to-end 4×4 field transfer of mux followed by demux, lossless
    /// fiber in between.
    pub fn composite(&self) -> [[C64; 4]; 4] {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        match self.mode {
            MuxMode::Ideal4 => {
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = C64::new(1.0, 0.0);
                }
            }
            MuxMode::Pdm2 => {
                m[0][0] = C64::new(1.0, 0.0);
                m[1][1] = C64::new(1.0, 0.0);
            }
            MuxMode::PhysicalJones => {
                let rx = self.rx_map();
                let k = std::f64::consts::FRAC_1_SQRT_2;
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = (rx[i][0] * self.tx_map[0][j] + rx[i][1] * self.tx_map[1][j]) * k;
                    }
                }
            }
        }
        m
    }

    /// Number of field components the mux output occupies in the fiber.
    pub fn n_components(&self) -> usize {
        match self.mode {
            MuxMode::Ideal4 => 4,
            _ => 2,
        }
    }
}

impl Default for CpdmMuxModel {
    fn default() -> Self {
        Self::ideal4()
    }
}

/// Combines the four modulated tributaries into the launched field.
pub fn cpdm_mux<T: Real>(tribs: &TributarySet<T>, model: &CpdmMuxModel) -> Result<OpticalField<T>> {
    let [a, b, c, d] = tribs.as_array();
    crate::signal::waveform::check_pair(a, b, "cpdm_mux")?;
    crate::signal::waveform::check_pair(a, c, "cpdm_mux")?;
    crate::signal::waveform::check_pair(a, d, "cpdm_mux")?;
    match model.mode {
        MuxMode::Ideal4 => OpticalField::new(vec![
            JonesSignal::new(a.clone(), b.clone())?,
            JonesSignal::new(c.clone(), d.clone())?,
        ]),
        MuxMode::Pdm2 => OpticalField::new(vec![JonesSignal::new(a.clone(), b.clone())?]),
        MuxMode::PhysicalJones => {
            let k = std::f64::consts::FRAC_1_SQRT_2;
            let m: Vec<[Complex<T>; 4]> = model
                .tx_map
                .iter()
                .map(|row| {
                    row.map(|v| {
                        let v = v * k;
                        Complex::new(T::lit(v.re), T::lit(v.im))
                    })
                })
                .collect();
            let src = [a.samples(), b.samples(), c.samples(), d.samples()];
            let comp = |r: &[Complex<T>; 4]| -> Vec<Complex<T>> {
                (0..a.len())
                    .map(|i| {
                        r[0] * src[0][i] + r[1] * src[1][i] + r[2] * src[2][i] + r[3] * src[3][i]
                    })
                    .collect()
            };
            let x = ComplexWaveform::new(comp(&m[0]), a.sample_rate())?;
            let y = ComplexWaveform::new(comp(&m[1]), a.sample_rate())?;
            OpticalField::new(vec![JonesSignal::new(x, y)?])
        }
    }
}

/// Splits a received field into the four detection-branch fields.
///
/// Ideal4 hands the logical channels back unchanged; physical mode applies
/// the receiver optics `rx_map`; PDM2 returns H/V for the RCP pair and
/// zero fields for the LCP pair.
pub fn cpdm_demux<T: Real>(
    field: &OpticalField<T>,
    model: &CpdmMuxModel,
) -> Result<TributarySet<T>> {
    let pairs = field.pairs();
    let expect = match model.mode {
        MuxMode::Ideal4 => 2,
        _ => 1,
    };
    if pairs.len() != expect {
        return Err(Error::LengthMismatch {
            context: "cpdm_demux field pairs vs mux mode",
            left: pairs.len(),
            right: expect,
        });
    }
    match model.mode {
        MuxMode::Ideal4 => TributarySet::new(
            pairs[0].x.clone(),
            pairs[0].y.clone(),
            pairs[1].x.clone(),
            pairs[1].y.clone(),
        ),
        MuxMode::Pdm2 => {
            let z = ComplexWaveform::zeros(field.len(), field.sample_rate())?;
            TributarySet::new(pairs[0].x.clone(), pairs[0].y.clone(), z.clone(), z)
        }
        MuxMode::PhysicalJones => {
            let rx = model.rx_map();
            let (x, y) = (pairs[0].x.samples(), pairs[0].y.samples());
            let branch = |r: &[C64; 2]| {
                let (u, v) = (
                    Complex::new(T::lit(r[0].re), T::lit(r[0].im)),
                    Complex::new(T::lit(r[1].re), T::lit(r[1].im)),
                );
                let s = x.iter().zip(y).map(|(&p, &q)| u * p + v * q).collect();
                ComplexWaveform::new(s, field.sample_rate())
            };
            TributarySet::new(
                branch(&rx[0])?,
                branch(&rx[1])?,
                branch(&rx[2])?,
                branch(&rx[3])?,
            )
        }
    }
}

/// Splits one CW carrier into the four modulator carriers.
///
/// A linear input at any azimuth projects half its power onto each circular
/// state, and each circular state splits evenly at its PBS, so every branch
/// gets a quarter of the power. The azimuth survives only as a static phase
/// `∓θ` on the RCP/LCP branches.
pub fn split_carrier<T: Real>(
    carrier: &ComplexWaveform<T>,
    azimuth_deg: f64,
) -> [ComplexWaveform<T>; 4] {
    let th = azimuth_deg.to_radians();
    let r = Complex::from_polar(0.5, -th);
    let l = Complex::from_polar(0.5, th);
    let make = |g: C64| {
        let g = Complex::new(T::lit(g.re), T::lit(g.im));
        carrier.with_samples(carrier.samples().iter().map(|&s| s * g).collect())
    };
    let (rc, lc) = (make(r), make(l));
    [rc.clone(), rc, lc.clone(), lc]
}

/// Scales the field so the total mean power over all components is `p_dbm`.
pub fn set_launch_power<T: Real>(field: &OpticalField<T>, p_dbm: f64) -> Result<OpticalField<T>> {
    let p = field.power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::ZeroPower);
    }
    let target = crate::num::dbm_to_watt(p_dbm);
    let mut out = field.clone();
    out.scale_amplitude((target / p).sqrt());
    Ok(out)
}

/// Relative power scaling by `db`.
pub fn scale_power_db<T: Real>(field: &OpticalField<T>, db: f64) -> OpticalField<T> {
    let mut out = field.clone();
    out.scale_amplitude(10f64.powf(db / 20.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::watt_to_dbm;
    use rand::SeedableRng;

    fn random_set(n: usize, seed: u64) -> TributarySet<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let s = (0..n)
                .map(|_| crate::num::complex_gaussian(rng, 1.0))
                .collect();
            ComplexWaveform::new(s, 1e9).unwrap()
        };
        TributarySet::new(mk(&mut rng), mk(&mut rng), mk(&mut rng), mk(&mut rng)).unwrap()
    }

    fn conj_t(m: &Jones2) -> Jones2 {
        [
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ]
    }

    #[test]
    fn waveplates_are_unitary() {
        for t in [-1.0, -0.3, 0.0, 0.5, std::f64::consts::FRAC_PI_4, 2.0] {
            let q = quarter_waveplate(t);
            let p = mul(&conj_t(&q), &q);
            for i in 0..2 {
                for j in 0..2 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((p[i][j] - C64::new(e, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qwp_at_45_makes_h_circular() {
        for t in [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4] {
            let q = quarter_waveplate(t);
            let (ex, ey) = (q[0][0], q[1][0]);
            assert!((ex.norm() - ey.norm()).abs() < 1e-12);
            let dphi = (ey / ex).arg();
            assert!((dphi.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        // rcp_h image is (1, j)/√2 up to a global phase
        let m = CpdmMuxModel::physical();
        let r = m.tx_map[1][0] / m.tx_map[0][0];
        assert!((r - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn tx_map_columns_unit_norm() {
        let m = CpdmMuxModel::physical();
        for j in 0..4 {
            let n = m.tx_map[0][j].norm_sqr() + m.tx_map[1][j].norm_sqr();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn physical_composite_has_rank_two() {
        let c = CpdmMuxModel::physical().composite();
        let m = nalgebra::Matrix4::from_fn(|i, j| c[i][j]);
        let sv = m.singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count();
        assert_eq!(rank, 2, "{sv:?}");
    }

    #[test]
    fn ideal4_round_trip_is_identity() {
        let t = random_set(256, 1);
        let m = CpdmMuxModel::ideal4();
        let f = cpdm_mux(&t, &m).unwrap();
        assert_eq!(f.n_components(), 4);
        let back = cpdm_demux(&f, &m).unwrap();
        assert_eq!(back, t);
        let p_in: f64 = t.as_array().iter().map(|w| w.power()).sum();
        assert!((f.power() - p_in).abs() < 1e-12 * p_in);
    }

    #[test]
    fn physical_single_path_power() {
        let mut t = random_set(512, 2);
        let z = ComplexWaveform::zeros(512, 1e9).unwrap();
        t.rcp_v = z.clone();
        t.lcp_h = z.clone();
        t.lcp_v = z;
        let f = cpdm_mux(&t, &CpdmMuxModel::physical()).unwrap();
        // unit-norm column behind a 3-dB combiner
        assert!((f.power() / t.rcp_h.power() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn physical_output_power_bounded_by_input() {
        for seed in 0..8 {
            let t = random_set(256, seed);
            let f = cpdm_mux(&t, &CpdmMuxModel::physical()).unwrap();
            let p_in: f64 = t.as_array().iter().map(|w| w.power()).sum();
            assert!(f.power() <= p_in * (1.0 + 1e-12));
        }
    }

    #[test]
    fn physical_demux_is_linear_image() {
        let t = random_set(64, 3);
        let m = CpdmMuxModel::physical();
        let back = cpdm_demux(&cpdm_mux(&t, &m).unwrap(), &m).unwrap();
        let c = m.composite();
        let src = t.as_array();
        let out = back.as_array();
        for i in 0..4 {
            for n in 0..64 {
                let e: C64 = (0..4).map(|j| c[i][j] * src[j].samples()[n]).sum();
                assert!((out[i].samples()[n] - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn carrier_split_quarters_power() {
        let w = ComplexWaveform::new(vec![C64::new(2.0, 0.0); 8], 1e9).unwrap();
        for b in split_carrier(&w, 45.0) {
            assert!((b.power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn launch_power_setting() {
        let f = cpdm_mux(&random_set(1024, 4), &CpdmMuxModel::ideal4()).unwrap();
        let a = set_launch_power(&f, -3.0).unwrap();
        assert!((a.power() - 0.501e-3).abs() < 1e-6);
        assert!((watt_to_dbm(a.power()) + 3.0).abs() < 1e-9);
        let b = set_launch_power(&a, -3.0).unwrap();
        assert!((watt_to_dbm(b.power()) + 3.0).abs() < 1e-9);
        let c = scale_power_db(&set_launch_power(&f, -6.0).unwrap(), 3.0);
        assert!((watt_to_dbm(c.power()) - watt_to_dbm(a.power())).abs() < 1e-9);
    }

    #[test]
    fn zero_field_rejected() {
        let z = ComplexWaveform::<f64>::zeros(16, 1e9).unwrap();
        let f = OpticalField::single(JonesSignal::new(z.clone(), z).unwrap());
        assert!(matches!(set_launch_power(&f, 0.0), Err(Error::ZeroPower)));
    }
}
