//! Simulation of a circular-polarization-multiplexed (CPDM) 8-QAM coherent
//! fiber link and its receiver DSP.
//!
//! Numeric stages are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the simulator uses.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod num;
pub mod rx;
pub mod signal;
pub mod transmitter;

pub use error::{Error, Result};
pub use num::Real;

pub type Waveform = signal::ComplexWaveform<f64>;
pub type Waveform32 = signal::ComplexWaveform<f32>;
pub type Jones = signal::JonesSignal<f64>;
pub type Jones32 = signal::JonesSignal<f32>;
pub type Field = signal::OpticalField<f64>;
pub type Field32 = signal::OpticalField<f32>;
pub type Tributaries = signal::TributarySet<f64>;
pub type Constellation = signal::Constellation8Qam<f64>;
