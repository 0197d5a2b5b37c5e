//! Receiver DSP chain.

pub mod bessel;
pub mod cdc;
pub mod chain;
pub mod cpe;
pub mod dbp;
pub mod equalizer;
pub mod foe;
pub mod qi;
pub mod timing;

#[cfg(test)]
pub(crate) mod testutil;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::{Geometry, ResampleMethod};
use crate::transmitter::{PulseShape, SYMBOL_RATE};

pub use bessel::{bessel_filter, BesselResponse};
pub use cdc::{cd_compensate, cd_compensate_fir, CdcMode};
pub use chain::{run_chain, run_chain_with_taps, DspOutput, StageEntry, StageReport, STAGE_NAMES};
pub use cpe::{count_slips, cpe_bps, CpeConfig, CpeTrack};
pub use dbp::{dbp, DbpConfig, DbpPlan};
pub use equalizer::{adaptive_equalize, EqConfig, EqMode, EqReport, EqualizerState};
pub use foe::{foe, FoeConfig, FoeMethod};
pub use qi::qi_compensate;
pub use timing::{timing_recover, TimingAlgorithm, TimingConfig, TimingReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesselConfig {
    pub order: usize,
    pub bw_3db: f64,
}

impl Default for BesselConfig {
    fn default() -> Self {
        Self {
            order: 4,
            bw_3db: 28e9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleConfig {
    pub sps: usize,
    pub method: ResampleMethod,
    /// Receive filter matched to the transmitted pulse, applied before
    /// decimation; `None` keeps only the anti-alias low-pass.
    pub matched: Option<PulseShape>,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            sps: 2,
            method: ResampleMethod::Cubic,
            matched: Some(PulseShape::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QiConfig {
    pub enable: bool,
}

impl Default for QiConfig {
    fn default() -> Self {
        Self { enable: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdcConfig {
    pub enable: bool,
    pub mode: CdcMode,
    /// FIR length in time mode; `None` is twice the analytic minimum.
    pub taps: Option<usize>,
    /// Distance to compensate; `None` is the link length.
    pub distance_km: Option<f64>,
}

impl Default for CdcConfig {
    fn default() -> Self {
        Self {
            enable: true,
            mode: CdcMode::Freq,
            taps: None,
            distance_km: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub symbol_rate: f64,
    pub geometry: Geometry,
    pub bessel: BesselConfig,
    pub resample: ResampleConfig,
    pub qi: QiConfig,
    pub cdc: CdcConfig,
    pub dbp: DbpConfig,
    pub timing: TimingConfig,
    pub eq: EqConfig,
    pub foe: FoeConfig,
    pub cpe: CpeConfig,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            symbol_rate: SYMBOL_RATE,
            geometry: Geometry::default(),
            bessel: BesselConfig::default(),
            resample: ResampleConfig::default(),
            qi: QiConfig::default(),
            cdc: CdcConfig::default(),
            dbp: DbpConfig::default(),
            timing: TimingConfig::default(),
            eq: EqConfig::default(),
            foe: FoeConfig::default(),
            cpe: CpeConfig::default(),
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate > 0.0) {
            return Err(invalid("dsp.symbol_rate", "must be positive"));
        }
        if self.resample.sps < 2 {
            return Err(invalid("resample.sps", "must be at least 2"));
        }
        if self.resample.sps != 2 {
            return Err(invalid(
                "resample.sps",
                "timing recovery and the equalizer run at 2 samples/symbol",
            ));
        }
        if let Some(d) = self.cdc.distance_km {
            if !(d >= 0.0) {
                return Err(invalid("cdc.distance_km", "must be ≥ 0"));
            }
        }
        BesselResponse::new(self.bessel.order, self.bessel.bw_3db)?;
        self.dbp.validate()?;
        self.timing.validate()?;
        self.eq.validate()?;
        self.foe.validate(self.symbol_rate)?;
        self.cpe.validate()?;
        Ok(())
    }
}
