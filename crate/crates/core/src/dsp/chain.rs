//! The eight-stage receiver chain.
//!
//! i Bessel low-pass · ii matched filtering and resampling to 2 sps · iii I/Q orthogonalization ·
//! iv static CD compensation · v digital backpropagation (replaces iv when
//! enabled) · vi timing recovery · vii CMA/RDE butterfly · viii frequency
//! offset and carrier phase recovery.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{FiberParams, LinkPlan};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rx::FrontendOutput;
use crate::signal::fft::FftPair;
use crate::signal::resample::{cubic_resample, fft_resample, lowpass};
use crate::signal::{ComplexWaveform, Constellation8Qam, ResampleMethod, TributarySet};
use crate::transmitter::{matched_response, CpdmMuxModel, MuxMode};

use super::{
    adaptive_equalize, bessel_filter, cd_compensate, cd_compensate_fir, cpe_bps, dbp, foe,
    qi_compensate, timing_recover, CdcMode, DbpPlan, DspConfig, EqReport, TimingReport,
};

pub const STAGE_NAMES: [&str; 8] = [
    "bessel",
    "resample",
    "qi",
    "cdc",
    "dbp",
    "timing",
    "equalizer",
    "foe_cpe",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    /// 1-based stage number.
    pub index: usize,
    pub name: String,
    pub active: bool,
    pub sample_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evm_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub foe_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_phase_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_slips: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stages: Vec<StageEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub equalizer: Vec<EqReport>,
}

impl StageReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.stages
            .iter()
            .flat_map(|s| s.warnings.iter().map(String::as_str))
    }

    pub fn stage(&self, name: &str) -> Option<&StageEntry> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DspOutput<T> {
    /// Recovered 1-sps streams, in equalizer output order; PDM leaves the
    /// LCP pair zero.
    pub symbols: TributarySet<T>,
    pub n_streams: usize,
    pub report: StageReport,
}

/// Blind EVM: mean squared distance to the nearest point after unit-power
/// normalization, dB.
pub fn blind_evm_db<T: Real>(y: &[Complex<T>], c: &Constellation8Qam<T>) -> f64 {
    let p = crate::num::mean_power(y);
    if !(p > 0.0) {
        return f64::INFINITY;
    }
    let g = T::lit(p.sqrt().recip());
    let e = y
        .iter()
        .map(|&v| c.nearest_distance_sqr(v * g).as_f64())
        .sum::<f64>()
        / y.len() as f64;
    10.0 * e.log10()
}

fn entry(index: usize, active: bool, rate: f64) -> StageEntry {
    StageEntry {
        index,
        name: STAGE_NAMES[index - 1].to_string(),
        active,
        sample_rate: rate,
        ..Default::default()
    }
}

fn groups(mode: MuxMode, n: usize) -> Vec<Vec<usize>> {
    match mode {
        MuxMode::Ideal4 if n == 4 => vec![vec![0, 1], vec![2, 3]],
        _ => vec![(0..n).collect()],
    }
}

/// Converts detection branches to the propagating field components for
/// backpropagation, and back.
fn to_field<T: Real>(bufs: &[Vec<Complex<T>>], mode: MuxMode) -> Vec<Vec<Complex<T>>> {
    if mode != MuxMode::PhysicalJones {
        return bufs.to_vec();
    }
    let rx = CpdmMuxModel::physical().rx_map();
    (0..2)
        .map(|p| {
            let k: Vec<Complex<T>> = (0..4)
                .map(|b| {
                    let v = rx[b][p].conj();
                    Complex::new(T::lit(v.re), T::lit(v.im))
                })
                .collect();
            (0..bufs[0].len())
                .map(|i| {
                    (0..4).fold(Complex::new(T::zero(), T::zero()), |a, b| {
                        a + k[b] * bufs[b][i]
                    })
                })
                .collect()
        })
        .collect()
}

fn from_field<T: Real>(field: Vec<Vec<Complex<T>>>, mode: MuxMode) -> Vec<Vec<Complex<T>>> {
    if mode != MuxMode::PhysicalJones {
        return field;
    }
    let rx = CpdmMuxModel::physical().rx_map();
    rx.iter()
        .map(|row| {
            let (u, v) = (
                Complex::new(T::lit(row[0].re), T::lit(row[0].im)),
                Complex::new(T::lit(row[1].re), T::lit(row[1].im)),
            );
            field[0]
                .iter()
                .zip(&field[1])
                .map(|(&x, &y)| u * x + v * y)
                .collect()
        })
        .collect()
}

pub fn run_chain<T: Real>(
    front: &FrontendOutput<T>,
    cfg: &DspConfig,
    link: &LinkPlan,
    fiber: &FiberParams,
) -> Result<DspOutput<T>> {
    run_chain_with_taps(front, cfg, link, fiber, |_, _, _| Ok(()))
}

/// Runs the chain; `tap` sees every stage's entry and output buffers.
pub fn run_chain_with_taps<T, F>(
    front: &FrontendOutput<T>,
    cfg: &DspConfig,
    link: &LinkPlan,
    fiber: &FiberParams,
    mut tap: F,
) -> Result<DspOutput<T>>
where
    T: Real,
    F: FnMut(&StageEntry, &[Vec<Complex<T>>], f64) -> Result<()>,
{
    cfg.validate()?;
    if front.branches.is_empty() || front.is_empty() {
        return Err(Error::Empty);
    }
    let rs = cfg.symbol_rate;
    let constellation = Constellation8Qam::<T>::new(cfg.geometry);
    let mut rate = front.sample_rate();
    let mut report = StageReport::default();

    // DC block and unit power per branch
    let mut bufs: Vec<Vec<Complex<T>>> = front
        .branches
        .iter()
        .map(|b| {
            let n = T::lit(b.len() as f64);
            let mean = b
                .samples()
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |a, &v| a + v)
                / n;
            let mut x: Vec<Complex<T>> = b.samples().iter().map(|&v| v - mean).collect();
            let p = crate::num::mean_power(&x);
            if p > 0.0 {
                let g = T::lit(p.sqrt().recip());
                x.iter_mut().for_each(|v| *v = *v * g);
            }
            x
        })
        .collect();

    // i
    let mut e = entry(1, true, rate);
    let mut bw = cfg.bessel.bw_3db;
    if bw >= 0.45 * rate {
        bw = 0.45 * rate;
        e.warnings.push(format!(
            "Bessel bandwidth {:.3e} Hz clamped to {bw:.3e} Hz below Nyquist",
            cfg.bessel.bw_3db
        ));
    }
    bessel_filter(&mut bufs, rate, cfg.bessel.order, bw)?;
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // ii
    let n_in = bufs[0].len();
    let n_sym = ((n_in as f64) * rs / rate).round() as usize;
    let m = cfg.resample.sps * n_sym;
    let new_rate = cfg.resample.sps as f64 * rs;
    if let Some(pulse) = cfg.resample.matched {
        let h: Vec<T> = matched_response(pulse, n_in, rate, rs)
            .into_iter()
            .map(T::lit)
            .collect();
        let mut fft = FftPair::new(n_in);
        for b in bufs.iter_mut() {
            fft.filter_real(b, &h);
        }
    }
    if m != n_in {
        for b in bufs.iter_mut() {
            *b = match cfg.resample.method {
                ResampleMethod::Fft => fft_resample(b, m),
                ResampleMethod::Cubic => {
                    if m < n_in {
                        lowpass(b, rate, 0.5 * new_rate);
                    }
                    cubic_resample(b, m, n_in as f64 / m as f64)
                }
            };
        }
    }
    rate = new_rate;
    let e = entry(2, true, rate);
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // iii
    let e = entry(3, cfg.qi.enable, rate);
    if cfg.qi.enable {
        for b in bufs.iter_mut() {
            qi_compensate(b)?;
        }
    }
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // iv
    let distance = cfg.cdc.distance_km.unwrap_or(link.total_km());
    let cdc_on = cfg.cdc.enable && !cfg.dbp.enable;
    let e = entry(4, cdc_on, rate);
    if cdc_on {
        match cfg.cdc.mode {
            CdcMode::Freq => cd_compensate(&mut bufs, rate, fiber, distance)?,
            CdcMode::Time => cd_compensate_fir(&mut bufs, rate, fiber, distance, cfg.cdc.taps)?,
        }
    }
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // v
    let e = entry(5, cfg.dbp.enable, rate);
    if cfg.dbp.enable {
        let span = FiberParams {
            length_km: link.span_length_km,
            ..*fiber
        };
        let plan = DbpPlan::new(span, link.n_spans, &cfg.dbp)?;
        plan.check_link(link.span_length_km, link.n_spans)?;
        let mut field = to_field(&bufs, front.mode);
        dbp(&mut field, rate, &plan)?;
        bufs = from_field(field, front.mode);
    }
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // vi
    let mut e = entry(6, true, rate);
    let (tbufs, trep) = timing_recover(&bufs, &cfg.timing)?;
    bufs = tbufs;
    if trep.diverged {
        e.warnings
            .push("timing loop error variance grew over the block".into());
    }
    report.timing = Some(trep);
    tap(&e, &bufs, rate)?;
    report.stages.push(e);

    // vii
    let mut e = entry(7, true, rs);
    let radii = constellation.radii();
    let r_cma = constellation.modulus_constant();
    let mut streams: Vec<Vec<Complex<T>>> = Vec::with_capacity(bufs.len());
    for g in groups(front.mode, bufs.len()) {
        let sub: Vec<Vec<Complex<T>>> = g.iter().map(|&i| bufs[i].clone()).collect();
        let (out, _, rep) = adaptive_equalize(&sub, &cfg.eq, &radii, r_cma)?;
        if rep.singularities > 0 {
            e.warnings.push(format!(
                "{} equalizer singularity re-initialization(s)",
                rep.singularities
            ));
        }
        streams.extend(out);
        report.equalizer.push(rep);
    }
    let conv: Vec<f64> = report
        .equalizer
        .iter()
        .map(EqReport::converged_error)
        .collect();
    e.converged_error = Some(conv.iter().sum::<f64>() / conv.len() as f64);
    drop(bufs);
    tap(&e, &streams, rs)?;
    report.stages.push(e);

    // viii
    let mut e = entry(8, true, rs);
    let ring = super::foe::fourth_power_ring(&constellation)?;
    match foe(&mut streams, rs, ring, &cfg.foe) {
        Ok(f) => e.foe_hz = Some(f),
        Err(Error::NoSpectralPeak(r)) => {
            e.foe_hz = Some(0.0);
            e.warnings.push(format!(
                "no dominant 4th-power peak (ratio {r:.1}); offset left uncorrected"
            ));
        }
        Err(err) => return Err(err),
    }
    let mut slips = 0;
    let mut step = 0.0;
    let mut evm = 0.0;
    for s in streams.iter_mut() {
        let t = cpe_bps(s, &constellation, &cfg.cpe)?;
        slips += t.cycle_slips;
        step += t.mean_step;
        evm += crate::num::db_to_linear(blind_evm_db(s, &constellation));
    }
    let ns = streams.len() as f64;
    e.cycle_slips = Some(slips);
    e.mean_phase_step = Some(step / ns);
    e.evm_db = Some(crate::num::linear_to_db(evm / ns));
    tap(&e, &streams, rs)?;
    report.stages.push(e);

    let wf = |s: &Vec<Complex<T>>| ComplexWaveform::new(s.clone(), rs);
    let zero = || ComplexWaveform::zeros(streams[0].len(), rs);
    let symbols = match streams.len() {
        4 => TributarySet::new(
            wf(&streams[0])?,
            wf(&streams[1])?,
            wf(&streams[2])?,
            wf(&streams[3])?,
        )?,
        2 => TributarySet::new(wf(&streams[0])?, wf(&streams[1])?, zero()?, zero()?)?,
        n => {
            return Err(Error::LengthMismatch {
                context: "equalizer output streams",
                left: n,
                right: 4,
            })
        }
    };
    Ok(DspOutput {
        symbols,
        n_streams: streams.len(),
        report,
    })
}
