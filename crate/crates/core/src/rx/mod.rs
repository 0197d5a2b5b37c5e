//! Coherent receiver front end: optics, balanced detection and the ADC.

pub mod adc;
pub mod frontend;

pub use adc::{adc, AdcParams, TRIBUTARY_BIT_RATE};
pub use frontend::{coherent_detect, FrontendConfig, FrontendOutput, PhotodiodeParams};

use crate::error::Result;
use crate::num::Real;
use crate::signal::OpticalField;
use crate::transmitter::CpdmMuxModel;

/// Detection followed by the ADC on every branch.
pub fn receive<T: Real>(
    field: &OpticalField<T>,
    cfg: &FrontendConfig,
    adc_params: &AdcParams,
    mux: &CpdmMuxModel,
    seed: u64,
) -> Result<FrontendOutput<T>> {
    let mut out = coherent_detect(field, cfg, mux, seed)?;
    for b in out.branches.iter_mut() {
        *b = adc(b, adc_params)?;
    }
    Ok(out)
}
