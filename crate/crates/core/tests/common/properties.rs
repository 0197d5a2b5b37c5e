//! Property suite shared by the core integration tests and the acceptance
//! run. Each check returns `Err(description)` on the first counterexample.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use cpdm_core::channel::{
    ase_load, derive_seed, ledger_osnr_db, run_link, ssfm_propagate, AmplifierParams, FiberParams,
    LinkPlan, StepRule,
};
use cpdm_core::dsp::{adaptive_equalize, cd_compensate, cpe_bps, CpeConfig, EqConfig};
use cpdm_core::metrics::{osnr_max_achievable, LinkReport, REF_BANDWIDTH_HZ};
use cpdm_core::num::relative_rms;
use cpdm_core::signal::resample::fft_resample;
use cpdm_core::signal::{
    demap_8qam, generate_bits, map_8qam, BitGenerator, ComplexWaveform, Constellation8Qam,
    Geometry, JonesSignal, OpticalField, TributarySet,
};
use cpdm_core::transmitter::{cpdm_demux, cpdm_mux, transmit, CpdmMuxModel, TransmitterConfig};

type C = Complex<f64>;

pub type Check = fn() -> Result<(), String>;

/// Every property, by name.
pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        (
            "constellation_normalization",
            constellation_normalization as Check,
        ),
        ("ssfm_second_order", ssfm_second_order),
        ("cd_is_all_pass", cd_is_all_pass),
        (
            "cd_compensation_inverts_dispersion",
            cd_compensation_inverts_dispersion,
        ),
        ("equalizer_scale_invariance", equalizer_scale_invariance),
        ("bps_quadrant_invariance", bps_quadrant_invariance),
        ("seed_determinism", seed_determinism),
        ("mux_ranks", mux_ranks),
        ("ideal4_round_trip", ideal4_round_trip),
        ("margin_identity", margin_identity),
        (
            "budget_matches_simulated_osnr",
            budget_matches_simulated_osnr,
        ),
    ]
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn report<T: std::fmt::Debug>(
    r: Result<(), proptest::test_runner::TestError<T>>,
) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Deterministic standard complex Gaussian samples (Box–Muller on
/// SplitMix output).
pub fn gaussian(n: usize, seed: u64) -> Vec<C> {
    (0..n)
        .map(|i| {
            let u = |k: u64| {
                ((derive_seed(seed, i as u64, k) >> 11) as f64 + 0.5) / (1u64 << 53) as f64
            };
            let r = (-2.0 * u(0).ln()).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
            C::from_polar(r, 2.0 * PI * u(1))
        })
        .collect()
}

/// Gaussian noise occupying the central half of the band.
fn bandlimited(n: usize, seed: u64) -> Vec<C> {
    fft_resample(&gaussian(n / 2, seed), n)
}

fn field(comps: &[Vec<C>], rate: f64) -> OpticalField<f64> {
    let w = |v: &Vec<C>| ComplexWaveform::new(v.clone(), rate).unwrap();
    let pairs = comps
        .chunks(2)
        .map(|p| JonesSignal::new(w(&p[0]), w(&p[1])).unwrap())
        .collect();
    OpticalField::new(pairs).unwrap()
}

fn linear_fiber(d: f64, slope: f64, length: f64) -> FiberParams {
    FiberParams {
        alpha_db_km: 0.0,
        dispersion_ps_nm_km: d,
        slope_ps_nm2_km: slope,
        n2: 0.0,
        length_km: length,
        ..FiberParams::default()
    }
}

pub fn constellation_normalization() -> Result<(), String> {
    for g in [Geometry::Star, Geometry::Rectangular] {
        let c = Constellation8Qam::<f64>::new(g);
        let e: f64 = (0..8).map(|l| c.point(l).norm_sqr()).sum::<f64>() / 8.0;
        if (e - 1.0).abs() > 1e-12 {
            return Err(format!("{g:?}: mean energy {e}"));
        }
    }
    report(runner(32).run(&(any::<u64>(), 1usize..2000), |(seed, n)| {
        let c = Constellation8Qam::<f64>::default();
        let bits = generate_bits(3 * n, seed, BitGenerator::Uniform);
        let s = map_8qam(&bits, &c, 1.0).unwrap();
        let back = demap_8qam(s.samples(), &c);
        ensure(back.bits() == bits.bits(), || {
            "map/demap round trip changed bits".into()
        })
    }))
}

/// Halving the step cuts the error against a fine reference by ~4.
pub fn ssfm_second_order() -> Result<(), String> {
    report(runner(4).run(&(0.1f64..0.3), |p| {
        let (n, rate) = (2048, 2e12);
        let t0 = 5e-12;
        let x: Vec<C> = (0..n)
            .map(|k| {
                let t = (k as f64 - n as f64 / 2.0) / rate;
                C::new((p * (-0.5 * (t / t0).powi(2)).exp()).sqrt(), 0.0)
            })
            .collect();
        let f = field(&[x, vec![C::new(0.0, 0.0); n]], rate);
        let fiber = FiberParams {
            length_km: 2.0,
            ..FiberParams::default()
        };
        let run = |dz: f64| {
            let step = StepRule::Fixed {
                dz_km: dz,
                max_phase: f64::INFINITY,
            };
            ssfm_propagate(&f, &fiber, step).unwrap().0
        };
        let reference = run(0.005);
        let err = |o: &OpticalField<f64>| {
            relative_rms(o.pairs()[0].x.samples(), reference.pairs()[0].x.samples())
        };
        let ratio = err(&run(0.2)) / err(&run(0.1));
        ensure((3.0..5.0).contains(&ratio), || {
            format!("error ratio {ratio} at {p} W")
        })
    }))
}

pub fn cd_is_all_pass() -> Result<(), String> {
    report(runner(16).run(
        &(-20.0f64..20.0, 1.0f64..2000.0, any::<u64>()),
        |(d, l, seed)| {
            let f = field(
                &[bandlimited(4096, seed), bandlimited(4096, seed ^ 1)],
                100e9,
            );
            let (out, _) =
                ssfm_propagate(&f, &linear_fiber(d, 0.057, l), StepRule::default()).unwrap();
            let ratio = out.power() / f.power();
            ensure((ratio - 1.0).abs() < 1e-12, || {
                format!("power ratio {ratio}")
            })
        },
    ))
}

pub fn cd_compensation_inverts_dispersion() -> Result<(), String> {
    report(runner(16).run(
        &(-20.0f64..20.0, 1.0f64..2000.0, any::<u64>()),
        |(d, l, seed)| {
            let rate = 100e9;
            let x = bandlimited(4096, seed);
            let fiber = linear_fiber(d, 0.057, l);
            let f = field(&[x.clone(), x.clone()], rate);
            let (out, _) = ssfm_propagate(&f, &fiber, StepRule::default()).unwrap();
            let mut bufs = vec![out.pairs()[0].x.samples().to_vec()];
            cd_compensate(&mut bufs, rate, &fiber, l).unwrap();
            let e = relative_rms(&bufs[0], &x);
            ensure(e < 1e-9, || format!("residual {e}"))
        },
    ))
}

/// Two-stream 8-QAM at 2 samples/symbol through a random unitary mix.
fn mixed_streams(n: usize, seed: u64, theta: f64, phi: f64) -> Vec<Vec<C>> {
    let c = Constellation8Qam::<f64>::default();
    let s: Vec<Vec<C>> = (0..2)
        .map(|k| {
            let b = generate_bits(3 * n, seed.wrapping_add(k), BitGenerator::Uniform);
            map_8qam(&b, &c, 1.0).unwrap().into_samples()
        })
        .collect();
    let up = |v: &[C]| -> Vec<C> {
        let mut out = Vec::with_capacity(2 * v.len());
        for k in 0..v.len() {
            out.push(v[k]);
            out.push(0.5 * (v[k] + v[(k + 1) % v.len()]));
        }
        out
    };
    let (a, b) = (up(&s[0]), up(&s[1]));
    let (ct, st) = (theta.cos(), theta.sin());
    let e = C::from_polar(1.0, phi);
    vec![
        a.iter().zip(&b).map(|(x, y)| x * ct + y * st * e).collect(),
        a.iter()
            .zip(&b)
            .map(|(x, y)| -x * st * e.conj() + y * ct)
            .collect(),
    ]
}

pub fn equalizer_scale_invariance() -> Result<(), String> {
    let c = Constellation8Qam::<f64>::default();
    let cfg = EqConfig {
        stage1_len: 2048,
        ..EqConfig::default()
    };
    report(runner(4).run(
        &(
            any::<u64>(),
            0.0f64..FRAC_PI_2,
            0.0f64..2.0 * PI,
            -3.0f64..3.0,
        ),
        |(seed, theta, phi, log_scale)| {
            let x = mixed_streams(4096, seed, theta, phi);
            let k = 10f64.powf(log_scale);
            let scaled: Vec<Vec<C>> = x
                .iter()
                .map(|b| b.iter().map(|v| v * k).collect())
                .collect();
            let (a, _, _) = adaptive_equalize(&x, &cfg, &c.radii(), c.modulus_constant()).unwrap();
            let (b, _, _) =
                adaptive_equalize(&scaled, &cfg, &c.radii(), c.modulus_constant()).unwrap();
            for (u, v) in a.iter().zip(&b) {
                let e = relative_rms(v, u);
                ensure(e < 1e-9, || format!("scale {k}: outputs differ by {e}"))?;
                let du: Vec<u8> = u.iter().map(|&s| c.decide(s)).collect();
                let dv: Vec<u8> = v.iter().map(|&s| c.decide(s)).collect();
                ensure(du == dv, || format!("scale {k}: decisions differ"))?;
            }
            Ok(())
        },
    ))
}

pub fn bps_quadrant_invariance() -> Result<(), String> {
    let c = Constellation8Qam::<f64>::default();
    report(
        runner(16).run(&(any::<u64>(), -0.3f64..0.3, 0u8..4), |(seed, theta, q)| {
            let b = generate_bits(3 * 2048, seed, BitGenerator::Uniform);
            let noise = gaussian(2048, seed ^ 7);
            let y: Vec<C> = map_8qam(&b, &c, 1.0)
                .unwrap()
                .samples()
                .iter()
                .zip(&noise)
                .map(|(s, w)| (s + 0.05 * w) * C::from_polar(1.0, theta))
                .collect();
            let rot = C::from_polar(1.0, q as f64 * FRAC_PI_2);
            let mut a = y.clone();
            let mut r: Vec<C> = y.iter().map(|v| v * rot).collect();
            cpe_bps(&mut a, &c, &CpeConfig::default()).unwrap();
            cpe_bps(&mut r, &c, &CpeConfig::default()).unwrap();
            // outputs agree up to one global multiple of π/2
            let best = (0..4)
                .map(|m| {
                    let j = C::from_polar(1.0, m as f64 * FRAC_PI_2);
                    let rotated: Vec<C> = a.iter().map(|v| v * j).collect();
                    relative_rms(&r, &rotated)
                })
                .fold(f64::INFINITY, f64::min);
            ensure(best < 1e-9, || {
                format!("rotation by {q}·π/2 changed the output by {best}")
            })
        }),
    )
}

pub fn seed_determinism() -> Result<(), String> {
    report(runner(3).run(&any::<u64>(), |seed| {
        let cfg = TransmitterConfig {
            sps: 8,
            ..TransmitterConfig::default()
        };
        let mux = CpdmMuxModel::ideal4();
        let a = transmit::<f64>(&cfg, &mux, 1024, seed).unwrap();
        let b = transmit::<f64>(&cfg, &mux, 1024, seed).unwrap();
        let other = transmit::<f64>(&cfg, &mux, 1024, seed.wrapping_add(1)).unwrap();
        ensure(a.field == b.field && a.bits == b.bits, || {
            "transmitter not reproducible".into()
        })?;
        ensure(a.field != other.field, || {
            "seed ignored by transmitter".into()
        })?;
        let plan = LinkPlan {
            n_spans: 2,
            obpf: None,
            step: StepRule::adaptive(0.01),
            ..LinkPlan::default()
        };
        let fiber = FiberParams::default();
        let amp = AmplifierParams::default();
        let x = run_link(&a.field, &plan, &fiber, &amp, seed).unwrap();
        let y = run_link(&a.field, &plan, &fiber, &amp, seed).unwrap();
        let z = run_link(&a.field, &plan, &fiber, &amp, seed.wrapping_add(1)).unwrap();
        ensure(x == y, || "link not reproducible".into())?;
        ensure(x != z, || "seed ignored by link".into())
    }))
}

fn rank(m: [[C; 4]; 4]) -> usize {
    let sv = nalgebra::Matrix4::from_fn(|i, j| m[i][j]).singular_values();
    sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count()
}

pub fn mux_ranks() -> Result<(), String> {
    for (m, want) in [
        (CpdmMuxModel::physical(), 2),
        (CpdmMuxModel::ideal4(), 4),
        (CpdmMuxModel::pdm2(), 2),
    ] {
        let r = rank(m.composite());
        if r != want {
            return Err(format!("{:?}: rank {r}, expected {want}", m.mode));
        }
    }
    Ok(())
}

pub fn ideal4_round_trip() -> Result<(), String> {
    report(runner(16).run(&(any::<u64>(), 1usize..512), |(seed, n)| {
        let w: Vec<ComplexWaveform<f64>> = (0..4)
            .map(|k| ComplexWaveform::new(gaussian(n, seed.wrapping_add(k)), 1e9).unwrap())
            .collect();
        let t = TributarySet::from_array(w.try_into().unwrap()).unwrap();
        let m = CpdmMuxModel::ideal4();
        let back = cpdm_demux(&cpdm_mux(&t, &m).unwrap(), &m).unwrap();
        ensure(back == t, || "ideal4 mux/demux is not the identity".into())
    }))
}

pub fn margin_identity() -> Result<(), String> {
    report(runner(64).run(&(5.0f64..35.0, 5.0f64..35.0), |(m, r)| {
        let rep = LinkReport {
            distance_km: 800.0,
            span_km: 80.0,
            launch_power_dbm: -3.0,
            sps_bit: 4.0,
            ber: 1e-4,
            ber_upper_bound: false,
            ber_ci_low: None,
            ber_ci_high: None,
            compared_bits: 1,
            evm_db: -15.0,
            q_factor_db: None,
            osnr_measured_db: None,
            osnr_required_db: Some(r),
            osnr_max_achievable_db: Some(m),
            osnr_margin_db: None,
            seed: 0,
        }
        .with_margin();
        ensure(rep.osnr_margin_db == Some(m - r), || {
            format!("{:?}", rep.osnr_margin_db)
        })?;
        ensure(rep.verify().is_ok(), || {
            "verify rejected a consistent report".into()
        })
    }))
}

/// Budget formula against the simulated (bookkept) OSNR over
/// {5, 8, 10} spans × −6..0 dBm, within 1.5 dB.
pub fn budget_matches_simulated_osnr() -> Result<(), String> {
    let mux = CpdmMuxModel::ideal4();
    let fiber = FiberParams {
        n2: 0.0,
        ..FiberParams::default()
    };
    for p in -6..=0 {
        let cfg = TransmitterConfig {
            launch_power_dbm: p as f64,
            ..TransmitterConfig::default()
        };
        let tx = transmit::<f64>(&cfg, &mux, 1 << 12, 3).map_err(|e| e.to_string())?;
        for n in [5, 8, 10] {
            let plan = LinkPlan {
                n_spans: n,
                step: StepRule::Fixed {
                    dz_km: 80.0,
                    max_phase: f64::INFINITY,
                },
                ..LinkPlan::default()
            };
            let out = run_link(&tx.field, &plan, &fiber, &AmplifierParams::default(), 5)
                .map_err(|e| e.to_string())?;
            let sim = ledger_osnr_db(&out, REF_BANDWIDTH_HZ).map_err(|e| e.to_string())?;
            let formula = osnr_max_achievable(p as f64, 4.0, 16.0, n).map_err(|e| e.to_string())?;
            if (sim - formula).abs() > 1.5 {
                return Err(format!(
                    "{p} dBm, {n} spans: simulated {sim:.2} dB vs formula {formula:.2} dB"
                ));
            }
        }
    }
    // loading noise on top lands on the requested value
    let cfg = TransmitterConfig::default();
    let tx = transmit::<f64>(&cfg, &mux, 1 << 12, 3).map_err(|e| e.to_string())?;
    let f = ase_load(&tx.field, 18.0, REF_BANDWIDTH_HZ, 1).map_err(|e| e.to_string())?;
    let o = ledger_osnr_db(&f, REF_BANDWIDTH_HZ).map_err(|e| e.to_string())?;
    if (o - 18.0).abs() > 1e-9 {
        return Err(format!("noise loading reached {o} dB instead of 18"));
    }
    Ok(())
}
