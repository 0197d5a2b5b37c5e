//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any
//! fails. Takes about 40 minutes on one core.

#[path = "../../core/tests/common/properties.rs"]
mod properties;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex;

use cpdm_core::channel::{
    obpf, run_link_with_taps, ssfm_propagate, AmplifierParams, FiberParams, LinkPlan, ObpfParams,
    StepRule,
};
use cpdm_core::dsp::{cd_compensate, dbp, DbpConfig, DbpPlan};
use cpdm_core::metrics::{measure_osnr, osnr_max_achievable, OsnrMethod, REF_BANDWIDTH_HZ};
use cpdm_core::num::{relative_rms, watt_to_dbm};
use cpdm_core::signal::{demap_8qam, generate_bits, map_8qam, BitGenerator, Constellation8Qam};
use cpdm_core::transmitter::{transmit, CpdmMuxModel, TransmitterConfig, SYMBOL_RATE};
use cpdm_sim::{run_points, validate_config, Row, RunOptions, Status};

type C = Complex<f64>;
type Outcome = Result<String, String>;

const C_LIGHT: f64 = 299_792_458.0;
const LAMBDA: f64 = 1550e-9;

/// Runs a sweep described by TOML and returns its rows; every row must
/// have succeeded.
fn sweep(toml: &str) -> Result<Vec<Row>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut spec, sweep) = validate_config(toml).map_err(|e| e.to_string())?;
    spec.output_dir = dir.path().to_path_buf();
    let rows = run_points(&spec, &sweep, &RunOptions::default()).map_err(|e| e.to_string())?;
    if let Some(r) = rows.iter().find(|r| r.status != Status::Ok) {
        return Err(format!(
            "point {} km / {} dBm failed: {}",
            r.distance_km, r.launch_power_dbm, r.message
        ));
    }
    Ok(rows)
}

fn required(rows: &[Row], pick: impl Fn(&Row) -> bool) -> Result<f64, String> {
    rows.iter()
        .find(|r| pick(r))
        .and_then(|r| r.osnr_required_db)
        .ok_or_else(|| "no required-OSNR row".to_string())
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Fiber with the given β₂ (ps²/km) and γ (1/(W·km)), lossless.
fn grid_fiber(beta2_ps2_km: f64, gamma: f64, span_km: f64) -> FiberParams {
    let beta2 = beta2_ps2_km * 1e-27;
    FiberParams {
        alpha_db_km: 0.0,
        dispersion_ps_nm_km: -2.0 * std::f64::consts::PI * C_LIGHT * beta2 / (LAMBDA * LAMBDA)
            * 1e6,
        n2: gamma * LAMBDA * 80e-12 / (2.0 * std::f64::consts::PI * 1e3),
        a_eff: 80e-12,
        length_km: span_km,
        wavelength_m: LAMBDA,
        ..FiberParams::default()
    }
}

const GRID: [(f64, f64, f64); 8] = [
    (-21.36, 0.5, 80.0),
    (-21.36, 0.5, 400.0),
    (-21.36, 1.317, 80.0),
    (-21.36, 1.317, 400.0),
    (-5.0, 0.5, 80.0),
    (-5.0, 0.5, 400.0),
    (-5.0, 1.317, 80.0),
    (-5.0, 1.317, 400.0),
];

fn ac1_dbp_inversion() -> Outcome {
    let t0 = Instant::now();
    let cfg = TransmitterConfig {
        launch_power_dbm: 0.0,
        ..TransmitterConfig::default()
    };
    let tx =
        transmit::<f64>(&cfg, &CpdmMuxModel::pdm2(), 1 << 14, 11).map_err(|e| e.to_string())?;
    let rate = tx.field.sample_rate();
    let mut worst = f64::NEG_INFINITY;
    for (b2, g, l) in GRID {
        let fiber = grid_fiber(b2, g, 80.0);
        if (fiber.beta2() * 1e24 - b2).abs() > 1e-9 || (fiber.gamma() - g).abs() > 1e-9 {
            return Err(format!(
                "grid fiber mismatch: β₂ {} γ {}",
                fiber.beta2() * 1e24,
                fiber.gamma()
            ));
        }
        let n_spans = (l / 80.0) as usize;
        let step = StepRule::Fixed {
            dz_km: 8.0,
            max_phase: f64::INFINITY,
        };
        let mut f = tx.field.clone();
        for _ in 0..n_spans {
            f = ssfm_propagate(&f, &fiber, step)
                .map_err(|e| e.to_string())?
                .0;
        }
        let dcfg = DbpConfig {
            enable: true,
            steps_per_span: 10,
            xi_nl: 1.0,
            launch_power_dbm: watt_to_dbm(tx.field.power()),
        };
        let plan = DbpPlan::new(fiber, n_spans, &dcfg).map_err(|e| e.to_string())?;
        let mut bufs: Vec<Vec<C>> = f.components().map(|w| w.samples().to_vec()).collect();
        dbp(&mut bufs, rate, &plan).map_err(|e| e.to_string())?;
        for (b, w) in bufs.iter().zip(tx.field.components()) {
            let evm = 20.0 * relative_rms(b, w.samples()).log10();
            worst = worst.max(evm);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst < -40.0 && secs < 60.0,
        format!("worst field EVM {worst:.1} dB over 8 grid points (< -40), {secs:.1} s (< 60)"),
    )
}

fn ac2_cd_exactness() -> Outcome {
    let tx = transmit::<f64>(
        &TransmitterConfig::default(),
        &CpdmMuxModel::pdm2(),
        1 << 12,
        5,
    )
    .map_err(|e| e.to_string())?;
    let rate = tx.field.sample_rate();
    let mut worst = 0.0f64;
    for (b2, _, l) in GRID {
        let fiber = FiberParams {
            n2: 0.0,
            length_km: l,
            ..grid_fiber(b2, 0.0, l)
        };
        let out = ssfm_propagate(&tx.field, &fiber, StepRule::default())
            .map_err(|e| e.to_string())?
            .0;
        let mut bufs: Vec<Vec<C>> = out.components().map(|w| w.samples().to_vec()).collect();
        cd_compensate(&mut bufs, rate, &fiber, l).map_err(|e| e.to_string())?;
        for (b, w) in bufs.iter().zip(tx.field.components()) {
            worst = worst.max(relative_rms(b, w.samples()));
        }
    }
    verdict(
        worst < 1e-9,
        format!("worst relative RMS residual {worst:.2e} (< 1e-9)"),
    )
}

/// Es/N0 (dB) where an ideal slicer on 8-QAM in complex AWGN reaches
/// `target`, from log-BER interpolation over a fine grid.
fn slicer_oracle(target: f64, n_bits: usize) -> (f64, usize) {
    let c = Constellation8Qam::<f64>::default();
    let bits = generate_bits(n_bits, 77, BitGenerator::Uniform);
    let s = map_8qam(&bits, &c, 1.0).unwrap().into_samples();
    let w = properties::gaussian(s.len(), 78);
    let ber = |esn0_db: f64| {
        let sigma = 10f64.powf(-esn0_db / 20.0);
        let y: Vec<C> = s.iter().zip(&w).map(|(a, n)| a + n * sigma).collect();
        let back = demap_8qam(&y, &c);
        let errs = back
            .bits()
            .iter()
            .zip(bits.bits())
            .filter(|(a, b)| a != b)
            .count();
        errs as f64 / n_bits as f64
    };
    let mut prev = (6.0, ber(6.0));
    let mut x = 6.0;
    while x < 25.0 {
        x += 0.25;
        let cur = (x, ber(x));
        if cur.1 <= target {
            let (l0, l1) = (prev.1.ln(), cur.1.ln());
            let t = (target.ln() - l0) / (l1 - l0);
            return (prev.0 + t * (cur.0 - prev.0), n_bits);
        }
        prev = cur;
    }
    (f64::NAN, n_bits)
}

fn ac3_awgn_sanity() -> Outcome {
    let rows = sweep(
        "n_symbols = 131072\ntarget_ber = 1e-3\ntasks = [\"required\"]\n\
         [sweep]\ndistances_km = [0]\ngamma = [false]\n\
         [search]\nlo = 6\nhi = 20\ntol = 0.02\n\
         [transmitter.laser]\nlinewidth_hz = 0\n\
         [frontend.lo]\nlinewidth_hz = 0\n\
         [frontend.photodiode]\nnoiseless = true\n",
    )?;
    let osnr = required(&rows, |_| true)?;
    let chain = osnr + 10.0 * (REF_BANDWIDTH_HZ / SYMBOL_RATE).log10();
    let (oracle, bits) = slicer_oracle(1e-3, 3 << 20);
    let d = chain - oracle;
    verdict(
        d.abs() <= 0.3,
        format!("chain Es/N0 {chain:.2} dB vs slicer oracle {oracle:.2} dB ({bits} bits) at BER 1e-3: Δ {d:+.2} dB (±0.3)"),
    )
}

fn penalty(toml: &str) -> Result<(f64, f64), String> {
    let rows = sweep(toml)?;
    let on = required(&rows, |r| r.gamma && r.distance_km == 800.0)?;
    let off = required(&rows, |r| !r.gamma && r.distance_km == 800.0)?;
    Ok((on, off))
}

fn ac4_nonlinear_penalty() -> Outcome {
    let (on, off) = penalty(
        "n_symbols = 65536\ntarget_ber = 1e-5\ntasks = [\"required\"]\n\
         [sweep]\ndistances_km = [800]\nlaunch_powers_dbm = [-3]\ngamma = [true, false]\n",
    )?;
    let p = on - off;
    verdict(
        (p - 2.7).abs() <= 1.0,
        format!("required OSNR γ on {on:.2} dB, off {off:.2} dB: penalty {p:.2} dB (2.7 ± 1.0)"),
    )
}

fn ac5_distance_penalty() -> Outcome {
    let (on, off) = penalty(
        "n_symbols = 32768\ntarget_ber = 1e-4\ntasks = [\"required\"]\n\
         [sweep]\ndistances_km = [800]\nlaunch_powers_dbm = [-3]\ngamma = [true, false]\n",
    )?;
    let p = on - off;
    verdict(
        (p - 1.67).abs() <= 0.75,
        format!(
            "800 km at BER 1e-4: γ on {on:.2} dB, off {off:.2} dB: penalty {p:.2} dB (1.67 ± 0.75)"
        ),
    )
}

fn ac6_link_budget() -> Outcome {
    let formula10 = osnr_max_achievable(-3.0, 4.0, 16.0, 10).map_err(|e| e.to_string())?;
    let formula6 = osnr_max_achievable(-3.0, 4.0, 16.0, 6).map_err(|e| e.to_string())?;
    let tx = transmit::<f64>(
        &TransmitterConfig::default(),
        &CpdmMuxModel::ideal4(),
        1 << 14,
        21,
    )
    .map_err(|e| e.to_string())?;
    let plan = LinkPlan {
        n_spans: 10,
        step: StepRule::adaptive(3e-3),
        ..LinkPlan::default()
    };
    let band = ObpfParams::default();
    let methods = [
        OsnrMethod::NoiseBookkeeping,
        OsnrMethod::SpectralInterp {
            signal_bandwidth_hz: 2.0 * SYMBOL_RATE,
        },
    ];
    let mut sim = Vec::new();
    run_link_with_taps(
        &tx.field,
        &plan,
        &FiberParams::default(),
        &AmplifierParams::default(),
        4,
        |k, f| {
            if k + 1 == 6 || k + 1 == 10 {
                let f = obpf(f, band.bandwidth_hz, band.shape)?;
                for m in methods {
                    sim.push((k + 1, m, measure_osnr(&f, m, REF_BANDWIDTH_HZ)?));
                }
            }
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;
    let mut ok = (formula10 - 25.0).abs() < 0.05;
    let mut parts = vec![format!(
        "formula {formula10:.2} dB at 10 spans, {formula6:.2} dB at 6"
    )];
    for (n, m, o) in &sim {
        let (formula, paper) = if *n == 10 {
            (formula10, 24.0)
        } else {
            (formula6, 26.0)
        };
        let good = (o - formula).abs() <= 1.5 && (o - paper).abs() <= 2.0;
        ok &= good;
        let name = match m {
            OsnrMethod::NoiseBookkeeping => "bookkeeping",
            OsnrMethod::SpectralInterp { .. } => "spectral",
        };
        parts.push(format!("{}km {name} {o:.2} dB (paper {paper})", n * 80));
    }
    verdict(ok && sim.len() == 4, parts.join("; "))
}

struct PowerSweep {
    powers: Vec<f64>,
    required: Vec<f64>,
    margin: Vec<f64>,
}

impl PowerSweep {
    fn run(scenario: &str) -> Result<Self, String> {
        let rows = sweep(&format!("scenario = \"{scenario}\"\nn_symbols = 65536\n"))?;
        let mut s = PowerSweep {
            powers: vec![],
            required: vec![],
            margin: vec![],
        };
        for r in &rows {
            s.powers.push(r.launch_power_dbm);
            s.required
                .push(r.osnr_required_db.ok_or("missing required OSNR")?);
            s.margin.push(r.osnr_margin_db.ok_or("missing margin")?);
        }
        Ok(s)
    }

    fn best(&self) -> (f64, f64) {
        let i = (0..self.margin.len())
            .max_by(|&a, &b| self.margin[a].total_cmp(&self.margin[b]))
            .unwrap();
        (self.powers[i], self.margin[i])
    }

    fn table(&self) -> String {
        self.powers
            .iter()
            .zip(&self.required)
            .map(|(p, r)| format!("{p}:{r:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn ac7_ac8_margins() -> (Outcome, Outcome) {
    let s80 = match PowerSweep::run("osnr_vs_power_80") {
        Ok(s) => s,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let s100 = PowerSweep::run("osnr_vs_power_100");

    let (p80, m80) = s80.best();
    let ac7 = s100.and_then(|s100| {
        let (p100, m100) = s100.best();
        verdict(
            (-5.0..=-1.0).contains(&p80)
                && (m80 - 7.0).abs() <= 1.5
                && (m100 - 1.2).abs() <= 1.5
                && m100 < m80,
            format!(
                "80-km spans: best {p80} dBm, margin {m80:.2} dB (7 ± 1.5, power in -5..-1); \
                 100-km spans: best {p100} dBm, margin {m100:.2} dB (1.2 ± 1.5, < 80-km)"
            ),
        )
    });

    let low: Vec<f64> = s80
        .powers
        .iter()
        .zip(&s80.required)
        .filter(|(p, _)| **p <= -5.0)
        .map(|(_, r)| *r)
        .collect();
    let spread = low.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - low.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = low.iter().sum::<f64>() / low.len() as f64;
    let top = *s80.required.last().unwrap();
    let ac8 = verdict(
        spread <= 0.5 && top > floor + 0.5 && (p80 + 3.0).abs() <= 2.0,
        format!(
            "required OSNR by power [{}]; spread ≤ -5 dBm {spread:.2} dB (≤ 0.5), rise to 0 dBm {:.2} dB (> 0.5), \
             optimum {p80} dBm (-3 ± 2)",
            s80.table(),
            top - floor
        ),
    );
    (ac7, ac8)
}

fn ac9_sampling_rate() -> Outcome {
    let rows = sweep(
        "scenario = \"reqosnr_vs_samplerate\"\nn_symbols = 32768\n[sweep]\nsps_bit = [2, 10]\n",
    )?;
    let pen = |d: f64| -> Result<f64, String> {
        Ok(required(&rows, |r| r.distance_km == d && r.sps_bit == 2.0)?
            - required(&rows, |r| r.distance_km == d && r.sps_bit == 10.0)?)
    };
    let (p240, p800) = (pen(240.0)?, pen(800.0)?);
    verdict(
        (p240 - 2.7).abs() <= 1.5 && (p800 - 7.0).abs() <= 1.5,
        format!("penalty 10 → 2 samples/bit: {p240:.2} dB at 240 km (2.7 ± 1.5), {p800:.2} dB at 800 km (7 ± 1.5)"),
    )
}

fn ac10_constellation() -> Outcome {
    let rows = sweep("scenario = \"constellation_560km\"\nn_symbols = 16384\n")?;
    let spread = |g: bool| {
        rows.iter()
            .find(|r| r.gamma == g)
            .and_then(|r| r.cluster_rms)
            .ok_or_else(|| "missing cluster spread".to_string())
    };
    let (on, off) = (spread(true)?, spread(false)?);
    verdict(
        on > off,
        format!("cluster RMS spread at 560 km: γ on {on:.4}, off {off:.4}"),
    )
}

fn ac11_properties() -> Outcome {
    let mut failed = Vec::new();
    let all = properties::all();
    for (name, check) in &all {
        if let Err(e) = check() {
            failed.push(format!("{name}: {e}"));
        }
    }
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} property suites", all.len())
        } else {
            failed.join("; ")
        },
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, o: Outcome, secs: f64| match o {
        Ok(d) => println!("{id} PASS: {d} [{secs:.0} s]"),
        Err(d) => {
            failures += 1;
            println!("{id} FAIL: {d} [{secs:.0} s]");
        }
    };
    let single: [(&str, fn() -> Outcome); 8] = [
        ("AC1", ac1_dbp_inversion),
        ("AC2", ac2_cd_exactness),
        ("AC3", ac3_awgn_sanity),
        ("AC4", ac4_nonlinear_penalty),
        ("AC5", ac5_distance_penalty),
        ("AC6", ac6_link_budget),
        ("AC9", ac9_sampling_rate),
        ("AC10", ac10_constellation),
    ];
    let only = std::env::var("CPDM_ACCEPTANCE").ok();
    let wanted = |id: &str| {
        only.as_deref()
            .is_none_or(|o| o.split(',').any(|x| x == id))
    };
    for (id, f) in &single[..6] {
        if wanted(id) {
            let t = Instant::now();
            let o = guarded(f);
            report(id, o, t.elapsed().as_secs_f64());
        }
    }
    if wanted("AC7") || wanted("AC8") {
        let t = Instant::now();
        let (a7, a8) = catch_unwind(ac7_ac8_margins)
            .unwrap_or_else(|_| (Err("panicked".to_string()), Err("panicked".to_string())));
        let secs = t.elapsed().as_secs_f64();
        report("AC7", a7, secs);
        report("AC8", a8, secs);
    }
    for (id, f) in &single[6..] {
        if wanted(id) {
            let t = Instant::now();
            let o = guarded(f);
            report(id, o, t.elapsed().as_secs_f64());
        }
    }
    if wanted("AC11") {
        let t = Instant::now();
        let o = guarded(ac11_properties);
        report("AC11", o, t.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
