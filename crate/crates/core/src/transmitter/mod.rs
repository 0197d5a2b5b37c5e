//! Laser, I/Q modulators and the CPDM polarization-multiplexing optics.

pub mod iq;
pub mod laser;
pub mod mux;

pub use iq::{iq_modulate, matched_response, shape_pulses, IqModulatorParams, PulseShape};
pub use laser::{laser, LaserParams};
pub use mux::{
    cpdm_demux, cpdm_mux, quarter_waveplate, scale_power_db, set_launch_power, split_carrier,
    CpdmMuxModel, MuxMode,
};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;
use crate::signal::{
    generate_bits, map_8qam, BitGenerator, BitStream, Constellation8Qam, Geometry, OpticalField,
    TributarySet,
};

/// Per-tributary symbol rate: 28 Gb/s at 3 bits per symbol.
pub const SYMBOL_RATE: f64 = 28e9 / 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitterConfig {
    pub laser: LaserParams,
    pub symbol_rate: f64,
    pub sps: usize,
    pub pulse: PulseShape,
    pub iq: IqModulatorParams,
    pub generator: BitGenerator,
    pub geometry: Geometry,
    pub launch_power_dbm: f64,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        Self {
            laser: LaserParams::default(),
            symbol_rate: SYMBOL_RATE,
            sps: 16,
            pulse: PulseShape::default(),
            iq: IqModulatorParams::default(),
            generator: BitGenerator::Prbs15,
            geometry: Geometry::Star,
            launch_power_dbm: -3.0,
        }
    }
}

/// Everything the transmitter produced; the reference data is kept for
/// error counting downstream.
#[derive(Clone, Debug)]
pub struct TxOutput<T> {
    pub field: OpticalField<T>,
    pub bits: [BitStream; 4],
    pub symbols: [Vec<Complex<T>>; 4],
}

/// Builds the launched field: one laser split four ways, four independently
/// seeded bit streams, 8-QAM mapping, I/Q modulation, CPDM multiplexing and
/// launch-power setting.
pub fn transmit<T: Real>(
    cfg: &TransmitterConfig,
    mux: &CpdmMuxModel,
    n_symbols: usize,
    seed: u64,
) -> Result<TxOutput<T>> {
    if n_symbols == 0 {
        return Err(invalid("n_symbols", "must be positive"));
    }
    if !(cfg.symbol_rate > 0.0) {
        return Err(invalid("symbol_rate", "must be positive"));
    }
    let rate = cfg.symbol_rate * cfg.sps as f64;
    let n = n_symbols * cfg.sps;
    let carrier = laser::<T>(&cfg.laser, n, rate, seed ^ 0x1a5e)?;
    let carriers = split_carrier(&carrier, cfg.laser.azimuth_deg);
    let c = Constellation8Qam::<T>::new(cfg.geometry);
    let mut bits = Vec::with_capacity(4);
    let mut symbols = Vec::with_capacity(4);
    let mut waves = Vec::with_capacity(4);
    for (k, car) in carriers.iter().enumerate() {
        let b = generate_bits(
            3 * n_symbols,
            seed.wrapping_add(1 + k as u64 * 7919),
            cfg.generator,
        );
        let s = map_8qam(&b, &c, cfg.symbol_rate)?.into_samples();
        waves.push(iq_modulate(car, &s, cfg.sps, cfg.pulse, &cfg.iq)?);
        bits.push(b);
        symbols.push(s);
    }
    let tribs = TributarySet::from_array(waves.try_into().expect("four tributaries"))?;
    let field = cpdm_mux(&tribs, mux)?.with_wavelength(cfg.laser.wavelength_m);
    let field = set_launch_power(&field, cfg.launch_power_dbm)?;
    Ok(TxOutput {
        field,
        bits: bits.try_into().expect("four tributaries"),
        symbols: symbols.try_into().expect("four tributaries"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::watt_to_dbm;

    #[test]
    fn transmit_is_deterministic_and_hits_launch_power() {
        let cfg = TransmitterConfig {
            sps: 4,
            ..Default::default()
        };
        let a = transmit::<f64>(&cfg, &CpdmMuxModel::ideal4(), 512, 9).unwrap();
        let b = transmit::<f64>(&cfg, &CpdmMuxModel::ideal4(), 512, 9).unwrap();
        assert_eq!(a.field, b.field);
        assert!((watt_to_dbm(a.field.power()) + 3.0).abs() < 1e-9);
        assert_eq!(a.field.sample_rate(), SYMBOL_RATE * 4.0);
        // tributaries carry different data
        assert_ne!(a.bits[0].bits(), a.bits[1].bits());
    }
}
