//! Pseudo-random bit sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitGenerator {
    Prbs15,
    Prbs23,
    Uniform,
}

impl BitGenerator {
    /// `(register length, feedback tap)` of the maximal-length LFSR.
    fn lfsr(self) -> Option<(u32, u32)> {
        match self {
            BitGenerator::Prbs15 => Some((15, 14)),
            BitGenerator::Prbs23 => Some((23, 18)),
            BitGenerator::Uniform => None,
        }
    }

    /// Sequence period, `None` for the uniform source.
    pub fn period(self) -> Option<usize> {
        self.lfsr().map(|(n, _)| (1usize << n) - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
    pub seed: u64,
    pub generator: BitGenerator,
}

impl BitStream {
    /// Wraps raw bits (each 0 or 1) that did not come from [`generate_bits`].
    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self {
            bits,
            seed: 0,
            generator: BitGenerator::Uniform,
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones_fraction(&self) -> f64 {
        self.bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / self.bits.len() as f64
    }
}

/// Generates `n` bits.
///
/// PRBS sources use a Fibonacci LFSR (`x^15 + x^14 + 1`, `x^23 + x^18 + 1`)
/// whose nonzero start state is derived from `seed`; `Uniform` draws from a
/// seeded ChaCha8 stream. Output depends only on `(n, seed, generator)`.
pub fn generate_bits(n: usize, seed: u64, generator: BitGenerator) -> BitStream {
    let bits = match generator.lfsr() {
        Some((len, tap)) => {
            let mask = (1u32 << len) - 1;
            let mut state = ((seed % mask as u64) as u32 + 1) & mask;
            (0..n)
                .map(|_| {
                    let b = ((state >> (len - 1)) ^ (state >> (tap - 1))) & 1;
                    state = ((state << 1) | b) & mask;
                    b as u8
                })
                .collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random::<bool>() as u8).collect()
        }
    };
    BitStream {
        bits,
        seed,
        generator,
    }
}
