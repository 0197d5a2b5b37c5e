//! Built-in experiment presets and stage documentation.

use serde::{Deserialize, Serialize};

use crate::config::Axis;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(rename = "constellation_560km")]
    Constellation560km,
    BerVsDistance,
    BerVsOsnr,
    ReqosnrVsDistance,
    #[serde(rename = "osnr_vs_power_80")]
    OsnrVsPower80,
    #[serde(rename = "osnr_vs_power_100")]
    OsnrVsPower100,
    ReqosnrVsSamplerate,
    #[default]
    Custom,
}

/// What to compute at every sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// BER after a link with distributed amplifier noise.
    Ber,
    /// BER after a noiseless link with noise loaded to each `osnr_db` value.
    BerAtOsnr,
    /// OSNR at which BER crosses the target (noise loading, bisection).
    Required,
    /// Recovered-symbol export and cluster spread after the noisy link.
    Constellation,
}

impl Task {
    /// Whether the task needs the link run with amplifier noise.
    pub fn noisy(self) -> bool {
        matches!(self, Task::Ber | Task::Constellation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDefaults {
    pub span_km: f64,
    pub distances_km: Axis,
    pub launch_powers_dbm: Axis,
    pub sps_bit: Axis,
    pub osnr_db: Axis,
    pub gamma: Vec<bool>,
    pub dbp: Vec<bool>,
    pub tasks: Vec<Task>,
}

fn range(start: f64, stop: f64, step: f64) -> Axis {
    Axis::Range { start, stop, step }
}

fn list(v: &[f64]) -> Axis {
    Axis::List(v.to_vec())
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Constellation560km,
        Scenario::BerVsDistance,
        Scenario::BerVsOsnr,
        Scenario::ReqosnrVsDistance,
        Scenario::OsnrVsPower80,
        Scenario::OsnrVsPower100,
        Scenario::ReqosnrVsSamplerate,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Constellation560km => "constellation_560km",
            Scenario::BerVsDistance => "ber_vs_distance",
            Scenario::BerVsOsnr => "ber_vs_osnr",
            Scenario::ReqosnrVsDistance => "reqosnr_vs_distance",
            Scenario::OsnrVsPower80 => "osnr_vs_power_80",
            Scenario::OsnrVsPower100 => "osnr_vs_power_100",
            Scenario::ReqosnrVsSamplerate => "reqosnr_vs_samplerate",
            Scenario::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::Constellation560km => {
                "recovered constellations after 560 km at -3 dBm, nonlinearity on and off"
            }
            Scenario::BerVsDistance => "BER vs distance 80..800 km at -6 and -4 dBm launch power",
            Scenario::BerVsOsnr => {
                "BER vs loaded OSNR 10..24 dB after 800 km, nonlinearity on and off"
            }
            Scenario::ReqosnrVsDistance => {
                "required OSNR vs distance 80..800 km, nonlinearity on and off"
            }
            Scenario::OsnrVsPower80 => {
                "required / achievable OSNR and margin vs launch power, 10 x 80 km spans"
            }
            Scenario::OsnrVsPower100 => {
                "required / achievable OSNR and margin vs launch power, 8 x 100 km spans"
            }
            Scenario::ReqosnrVsSamplerate => {
                "required OSNR vs receiver samples per bit 2..10 at 240 and 800 km"
            }
            Scenario::Custom => {
                "whatever the [sweep] section and `tasks` list say (default: BER at 800 km)"
            }
        }
    }

    pub fn defaults(self) -> ScenarioDefaults {
        let base = ScenarioDefaults {
            span_km: 80.0,
            distances_km: list(&[800.0]),
            launch_powers_dbm: list(&[-3.0]),
            sps_bit: list(&[4.0]),
            osnr_db: list(&[20.0]),
            gamma: vec![true],
            dbp: vec![false],
            tasks: vec![Task::Ber],
        };
        match self {
            Scenario::Constellation560km => ScenarioDefaults {
                distances_km: list(&[560.0]),
                gamma: vec![true, false],
                tasks: vec![Task::Constellation],
                ..base
            },
            Scenario::BerVsDistance => ScenarioDefaults {
                distances_km: range(80.0, 800.0, 80.0),
                launch_powers_dbm: list(&[-6.0, -4.0]),
                ..base
            },
            Scenario::BerVsOsnr => ScenarioDefaults {
                osnr_db: range(10.0, 24.0, 1.0),
                gamma: vec![true, false],
                tasks: vec![Task::BerAtOsnr],
                ..base
            },
            Scenario::ReqosnrVsDistance => ScenarioDefaults {
                distances_km: range(80.0, 800.0, 80.0),
                gamma: vec![true, false],
                tasks: vec![Task::Required],
                ..base
            },
            Scenario::OsnrVsPower80 => ScenarioDefaults {
                launch_powers_dbm: range(-8.0, 0.0, 1.0),
                tasks: vec![Task::Required],
                ..base
            },
            Scenario::OsnrVsPower100 => ScenarioDefaults {
                span_km: 100.0,
                launch_powers_dbm: range(-8.0, 0.0, 1.0),
                tasks: vec![Task::Required],
                ..base
            },
            Scenario::ReqosnrVsSamplerate => ScenarioDefaults {
                distances_km: list(&[240.0, 800.0]),
                sps_bit: range(2.0, 10.0, 1.0),
                tasks: vec![Task::Required],
                ..base
            },
            Scenario::Custom => base,
        }
    }
}

/// One line per built-in scenario.
pub fn list_presets() -> String {
    Scenario::ALL
        .iter()
        .map(|s| format!("{:<24}{}\n", s.name(), s.summary()))
        .collect()
}

const STAGES: [(&str, &str); 8] = [
    (
        "bessel",
        "Stage i: 4th-order Bessel low-pass (bilinear, prewarped) on every detected branch. \
         Keys: dsp.bessel.order, dsp.bessel.bw_3db (Hz, default 28e9; clamped to 0.45 x ADC rate).",
    ),
    (
        "resample",
        "Stage ii: receive filter matched to the transmit pulse, then resampling to 2 samples/symbol. \
         Keys: dsp.resample.method (cubic | fft), dsp.resample.matched (pulse or absent).",
    ),
    (
        "qi",
        "Stage iii: quadrature-imbalance correction by Gram-Schmidt orthogonalization of I and Q. \
         Keys: dsp.qi.enable.",
    ),
    (
        "cdc",
        "Stage iv: static chromatic-dispersion compensation with the exact inverse of the fiber's \
         quadratic and cubic phase, in the frequency domain or as a tapered FIR. \
         Keys: dsp.cdc.enable, dsp.cdc.mode (freq | time), dsp.cdc.taps, dsp.cdc.distance_km.",
    ),
    (
        "dbp",
        "Stage v: digital backpropagation. The received field is propagated through a virtual fiber \
         with negated parameters by the split-step Fourier method:\n\
         \n    dA/d(-z) = (D + N) A,\n    D = -j(b2/2) d2/dt2 + (b3/6) d3/dt3 - a/2,\n    N = j xi g |A|^2\n\n\
         with steps_per_span linear/nonlinear steps per span and the nonlinear step scaled by xi. \
         The field is first normalized to the launch power; with xi = 0 the stage equals CD compensation. \
         Replaces stage iv when enabled. \
         Keys: dsp.dbp.enable, dsp.dbp.steps_per_span (20), dsp.dbp.xi_nl (0.76), dsp.dbp.launch_power_dbm.",
    ),
    (
        "timing",
        "Stage vi: Gardner timing-error detector with a second-order loop, interpolating on a 4x \
         upsampled copy. Keys: dsp.timing.*.",
    ),
    (
        "equalizer",
        "Stage vii: butterfly FIR equalizer at T/2, CMA (Godard modulus) converging then switching to \
         radius-directed updates. Keys: dsp.eq.n_taps, dsp.eq.mu_cma, dsp.eq.mu_rde, dsp.eq.stage1_len, dsp.eq.passes.",
    ),
    (
        "foe_cpe",
        "Stage viii: 4th-power frequency-offset estimation and removal, then blind phase search \
         carrier-phase estimation with sector unwrapping and cycle-slip counting. Keys: dsp.foe.*, dsp.cpe.*.",
    ),
];

/// Documentation for a DSP stage or a scenario.
pub fn describe_stage(name: &str) -> Result<String, String> {
    if let Some((_, text)) = STAGES.iter().find(|(n, _)| *n == name) {
        return Ok(format!("{name}\n{text}\n"));
    }
    if let Some(s) = Scenario::from_name(name) {
        let d = s.defaults();
        return Ok(format!(
            "{}\n{}\ndefaults: span {} km, distances {:?} km, launch powers {:?} dBm, samples/bit {:?}, \
             OSNR {:?} dB, nonlinearity {:?}, dbp {:?}, tasks {:?}\n",
            s.name(),
            s.summary(),
            d.span_km,
            d.distances_km.values(),
            d.launch_powers_dbm.values(),
            d.sps_bit.values(),
            d.osnr_db.values(),
            d.gamma,
            d.dbp,
            d.tasks
        ));
    }
    let mut valid: Vec<&str> = STAGES.iter().map(|(n, _)| *n).collect();
    valid.extend(Scenario::ALL.iter().map(|s| s.name()));
    Err(format!(
        "unknown name `{name}`; valid names: {}",
        valid.join(", ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_name(s.name()), Some(s));
            let v: Scenario = serde_json::from_str(&format!("\"{}\"", s.name())).unwrap();
            assert_eq!(v, s);
        }
    }

    #[test]
    fn stage_names_match_the_chain() {
        let names: Vec<&str> = STAGES.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, cpdm_core::dsp::STAGE_NAMES);
    }
}
