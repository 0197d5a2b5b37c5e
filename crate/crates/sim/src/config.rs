//! Experiment configuration: TOML schema, defaults and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cpdm_core::channel::{AmplifierParams, FiberParams, ObpfParams, StepRule};
use cpdm_core::dsp::DspConfig;
use cpdm_core::metrics::{MeasureConfig, OsnrMethod, OsnrSearch};
use cpdm_core::num::dbm_to_watt;
use cpdm_core::rx::{AdcParams, FrontendConfig};
use cpdm_core::transmitter::{MuxMode, TransmitterConfig};

use crate::scenario::{Scenario, Task};

/// Configuration problem with the dotted key path it concerns.
#[derive(Debug, Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn err(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

/// A list of values or an inclusive `{start, stop, step}` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, step } => {
                let n = ((stop - start) / step + 1e-9).floor() as i64;
                (0..=n.max(-1)).map(|k| start + k as f64 * step).collect()
            }
        }
    }

    fn check(&self, key: &str) -> Result<(), ConfigError> {
        if let Axis::Range { start, stop, step } = self {
            if !(*step > 0.0) || !(stop >= start) {
                return Err(err(key, "range needs step > 0 and stop ≥ start"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(err(key, "sweep range is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err(key, "values must be finite"));
        }
        Ok(())
    }
}

/// Sweep axes; unset axes take the scenario's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub distances_km: Option<Axis>,
    pub launch_powers_dbm: Option<Axis>,
    pub sps_bit: Option<Axis>,
    pub osnr_db: Option<Axis>,
    /// Fiber nonlinearity on/off; off sets γ = 0 with the same seeds.
    pub gamma: Option<Vec<bool>>,
    pub dbp: Option<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Db(f64),
    /// `"auto"`: matches the span loss.
    Auto(AutoGain),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoGain {
    Auto,
}

impl Default for Gain {
    fn default() -> Self {
        Gain::Auto(AutoGain::Auto)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierSection {
    pub gain_db: Gain,
    pub noise_figure_db: f64,
    pub n_sp: Option<f64>,
    pub allow_sub_quantum_nf: bool,
}

impl Default for AmplifierSection {
    fn default() -> Self {
        let a = AmplifierParams::default();
        Self {
            gain_db: Gain::default(),
            noise_figure_db: a.noise_figure_db,
            n_sp: a.n_sp,
            allow_sub_quantum_nf: a.allow_sub_quantum_nf,
        }
    }
}

impl AmplifierSection {
    pub fn params(&self, span_loss_db: f64) -> AmplifierParams {
        AmplifierParams {
            gain_db: Some(match self.gain_db {
                Gain::Db(g) => g,
                Gain::Auto(_) => span_loss_db,
            }),
            noise_figure_db: self.noise_figure_db,
            n_sp: self.n_sp,
            allow_sub_quantum_nf: self.allow_sub_quantum_nf,
            ..AmplifierParams::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    /// `None` takes the scenario's span length.
    pub span_km: Option<f64>,
    /// Optional fixed link; when both are set they must agree with `span_km`.
    pub n_spans: Option<usize>,
    pub distance_km: Option<f64>,
    pub obpf: Option<ObpfParams>,
    pub step: StepRule,
    pub polarization_rotation: bool,
    pub dgd_ps_per_span: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            span_km: None,
            n_spans: None,
            distance_km: None,
            obpf: Some(ObpfParams::default()),
            step: StepRule::adaptive(3e-3),
            polarization_rotation: true,
            dgd_ps_per_span: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub n_symbols: usize,
    pub master_seed: u64,
    pub mode: MuxMode,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub target_ber: f64,
    /// Work done at every sweep point; `None` takes the scenario's list.
    pub tasks: Option<Vec<Task>>,
    pub osnr_method: OsnrMethod,
    pub sweep: Sweep,
    pub link: LinkSection,
    pub amplifier: AmplifierSection,
    pub transmitter: TransmitterConfig,
    pub fiber: FiberParams,
    pub frontend: FrontendConfig,
    pub adc: AdcParams,
    pub dsp: DspConfig,
    pub search: OsnrSearch,
    pub measure: MeasureConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Custom,
            n_symbols: 1 << 16,
            master_seed: 1,
            mode: MuxMode::Ideal4,
            output_dir: PathBuf::from("out"),
            threads: 0,
            target_ber: 1e-4,
            tasks: None,
            osnr_method: OsnrMethod::default(),
            sweep: Sweep::default(),
            link: LinkSection::default(),
            amplifier: AmplifierSection::default(),
            transmitter: TransmitterConfig::default(),
            fiber: FiberParams::default(),
            frontend: FrontendConfig::default(),
            adc: AdcParams::default(),
            dsp: DspConfig::default(),
            search: OsnrSearch {
                lo: 6.0,
                hi: 30.0,
                tol: 0.1,
            },
            measure: MeasureConfig::default(),
        }
    }
}

/// The sweep after scenario defaults are applied, in SI units where the
/// core expects them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSweep {
    pub distances_km: Vec<f64>,
    pub n_spans: Vec<usize>,
    pub launch_powers_dbm: Vec<f64>,
    pub launch_powers_w: Vec<f64>,
    pub sps_bit: Vec<f64>,
    pub osnr_db: Vec<f64>,
    pub gamma: Vec<bool>,
    pub dbp: Vec<bool>,
    pub tasks: Vec<Task>,
    pub span_km: f64,
    pub span_length_m: f64,
    pub amplifier_gain_db: f64,
    /// Transmitter samples per symbol, raised when the fastest ADC needs it.
    pub tx_sps: usize,
}

/// Dotted key path of the entry at byte offset `at`: the last table header
/// above it plus the key on its line.
fn key_path(text: &str, at: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('[') {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len() + 1;
        if pos > at {
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<file>".to_string(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

pub fn parse(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        let key = e
            .span()
            .map_or_else(|| "<file>".to_string(), |s| key_path(text, s.start));
        err(key, e.message().to_string())
    })?;
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let key = e
            .span()
            .map_or_else(|| "<file>".to_string(), |s| key_path(text, s.start));
        err(key, e.message().to_string())
    })?;
    // span length may be given as fiber.length_km or link.span_km, but not
    // as two different numbers
    if let Some(l) = table
        .get("fiber")
        .and_then(|f| f.get("length_km"))
        .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
    {
        match spec.link.span_km {
            Some(s) if (l - s).abs() > 1e-9 => {
                return Err(err(
                    "fiber.length_km",
                    format!("{l} km contradicts link.span_km = {s} km"),
                ))
            }
            _ => spec.link.span_km = Some(l),
        }
    }
    Ok(spec)
}

/// Parses, applies defaults and checks the whole configuration.
pub fn validate_config(text: &str) -> Result<(ExperimentSpec, ResolvedSweep), ConfigError> {
    let mut spec = parse(text)?;
    let sweep = resolve(&mut spec)?;
    Ok((spec, sweep))
}

/// Applies scenario defaults in place (so the spec becomes a complete
/// snapshot) and expands the sweep.
pub fn resolve(spec: &mut ExperimentSpec) -> Result<ResolvedSweep, ConfigError> {
    if spec.n_symbols < 1 << 14 {
        return Err(err(
            "n_symbols",
            format!("{} is below the minimum 16384", spec.n_symbols),
        ));
    }
    if !(spec.target_ber > 0.0 && spec.target_ber < 0.5) {
        return Err(err("target_ber", "must lie in (0, 0.5)"));
    }
    let d = spec.scenario.defaults();
    let span_km = *spec.link.span_km.get_or_insert(d.span_km);
    if !(span_km > 0.0) {
        return Err(err("link.span_km", "must be positive"));
    }
    if spec.link.dgd_ps_per_span < 0.0 {
        return Err(err("link.dgd_ps_per_span", "must be non-negative"));
    }
    spec.fiber.length_km = span_km;
    spec.fiber
        .validate()
        .map_err(|e| err("fiber", e.to_string()))?;
    let span_loss = spec.fiber.span_loss_db();
    let amp = spec.amplifier.params(span_loss);
    amp.validate()
        .map_err(|e| err("amplifier", e.to_string()))?;
    if let Gain::Db(g) = spec.amplifier.gain_db {
        if (g - span_loss).abs() > 1e-9 {
            log::warn!("amplifier gain {g} dB does not match the span loss {span_loss} dB");
        }
    }
    spec.dsp.validate().map_err(|e| err("dsp", e.to_string()))?;
    if !(spec.search.lo < spec.search.hi && spec.search.tol > 0.0) {
        return Err(err("search", "need lo < hi and tol > 0"));
    }

    // fixed link in [link] overrides the scenario's distance axis
    let fixed = match (spec.link.n_spans, spec.link.distance_km) {
        (Some(n), Some(d)) => {
            let total = n as f64 * span_km;
            if (total - d).abs() > 1e-6 {
                return Err(err(
                    "link.distance_km",
                    format!(
                        "{n} spans × {} km = {total} km contradicts distance {d} km",
                        span_km
                    ),
                ));
            }
            Some(Axis::List(vec![d]))
        }
        (Some(n), None) => Some(Axis::List(vec![n as f64 * span_km])),
        (None, Some(d)) => Some(Axis::List(vec![d])),
        (None, None) => None,
    };
    if fixed.is_some() && spec.sweep.distances_km.is_some() {
        return Err(err(
            "sweep.distances_km",
            "both a fixed link ([link] n_spans/distance_km) and a distance sweep are set",
        ));
    }
    let pick = |a: &Option<Axis>, k: &str, def: &Axis| -> Result<Vec<f64>, ConfigError> {
        let a = a.clone().unwrap_or_else(|| def.clone());
        a.check(k)?;
        Ok(a.values())
    };
    let distances = pick(
        &spec.sweep.distances_km.clone().or(fixed),
        "sweep.distances_km",
        &d.distances_km,
    )?;
    let mut n_spans = Vec::with_capacity(distances.len());
    for &x in &distances {
        let n = x / span_km;
        if !(x >= 0.0) || (n - n.round()).abs() > 1e-6 {
            return Err(err(
                "sweep.distances_km",
                format!("{x} km is not a whole number of {} km spans", span_km),
            ));
        }
        n_spans.push(n.round() as usize);
    }
    let powers = pick(
        &spec.sweep.launch_powers_dbm,
        "sweep.launch_powers_dbm",
        &d.launch_powers_dbm,
    )?;
    let sps_bit = pick(&spec.sweep.sps_bit, "sweep.sps_bit", &d.sps_bit)?;
    if sps_bit.iter().any(|&s| !(s > 0.0)) {
        return Err(err("sweep.sps_bit", "must be positive"));
    }
    let osnr = pick(&spec.sweep.osnr_db, "sweep.osnr_db", &d.osnr_db)?;
    let gamma = spec.sweep.gamma.clone().unwrap_or(d.gamma);
    let dbp = spec.sweep.dbp.clone().unwrap_or(d.dbp);
    if gamma.is_empty() {
        return Err(err("sweep.gamma", "sweep range is empty"));
    }
    if dbp.is_empty() {
        return Err(err("sweep.dbp", "sweep range is empty"));
    }
    let tasks = spec.tasks.clone().unwrap_or(d.tasks);
    if tasks.is_empty() {
        return Err(err("tasks", "no work to do"));
    }
    let rs = spec.transmitter.symbol_rate;
    let fastest = sps_bit.iter().cloned().fold(0.0, f64::max) * cpdm_core::rx::TRIBUTARY_BIT_RATE;
    let tx_sps = spec
        .transmitter
        .sps
        .max((fastest / rs - 1e-9).ceil() as usize);
    Ok(ResolvedSweep {
        launch_powers_w: powers.iter().map(|&p| dbm_to_watt(p)).collect(),
        distances_km: distances,
        n_spans,
        launch_powers_dbm: powers,
        sps_bit,
        osnr_db: osnr,
        gamma,
        dbp,
        tasks,
        span_km,
        span_length_m: span_km * 1e3,
        amplifier_gain_db: amp.gain_db.unwrap_or(span_loss),
        tx_sps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_range_is_inclusive() {
        let a = Axis::Range {
            start: 80.0,
            stop: 800.0,
            step: 80.0,
        };
        assert_eq!(a.values().len(), 10);
        assert_eq!(*a.values().last().unwrap(), 800.0);
    }

    #[test]
    fn unknown_key_names_it() {
        let e = validate_config("n_symbol = 5").unwrap_err();
        assert!(e.to_string().contains("n_symbol"), "{e}");
    }
}
