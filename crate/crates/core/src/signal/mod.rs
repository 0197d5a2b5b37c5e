//! Waveform containers, bit sources, 8-QAM mapping and spectral utilities.

pub mod bits;
pub mod constellation;
pub mod dump;
pub mod fft;
pub mod field;
pub mod resample;
pub mod waveform;

pub use bits::{generate_bits, BitGenerator, BitStream};
pub use constellation::{demap_8qam, map_8qam, Constellation8Qam, Geometry};
pub use field::{NoiseLedger, OpticalField};
pub use resample::{resample, ResampleMethod};
pub use waveform::{ComplexWaveform, JonesSignal, TributarySet};
