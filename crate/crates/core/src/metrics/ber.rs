//! Bit-error counting, EVM and Q factor against the transmitted reference.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::num::{linear_to_db, Real};
use crate::signal::Constellation8Qam;

use super::sync::{quarter, realign, synchronize, to_c64, SyncConfig, SyncResult};

/// Fewest compared bits for which a confidence interval is reported.
pub const MIN_BITS_FOR_CI: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub errors: usize,
    pub compared: usize,
    /// 95% interval; normal approximation, or `[0, 3/n]` with zero errors.
    /// `None` below [`MIN_BITS_FOR_CI`] compared bits.
    pub ci: Option<(f64, f64)>,
}

impl BerEstimate {
    pub fn ratio(&self) -> f64 {
        if self.compared == 0 {
            0.5
        } else {
            self.errors as f64 / self.compared as f64
        }
    }

    /// True when no errors were seen; [`reported`](Self::reported) is then
    /// the bound `1/n`, not a measurement.
    pub fn is_upper_bound(&self) -> bool {
        self.errors == 0 && self.compared > 0
    }

    /// The value to plot: the measured ratio, or `1/n` with zero errors.
    pub fn reported(&self) -> f64 {
        if self.is_upper_bound() {
            1.0 / self.compared as f64
        } else {
            self.ratio()
        }
    }

    pub fn merge(&self, other: &BerEstimate) -> BerEstimate {
        from_counts(self.errors + other.errors, self.compared + other.compared)
    }

    /// Q factor in dB from the reported BER, `20·log₁₀(√2·erfc⁻¹(2·BER))`;
    /// `None` at BER ≥ 0.5.
    pub fn q_factor_db(&self) -> Option<f64> {
        q_factor_db(self.reported())
    }
}

pub fn q_factor_db(ber: f64) -> Option<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return None;
    }
    Some(20.0 * (std::f64::consts::SQRT_2 * erfc_inv(2.0 * ber)).log10())
}

fn from_counts(errors: usize, compared: usize) -> BerEstimate {
    let ci = (compared >= MIN_BITS_FOR_CI).then(|| {
        let n = compared as f64;
        if errors == 0 {
            (0.0, 3.0 / n)
        } else {
            let p = errors as f64 / n;
            let h = 1.96 * (p * (1.0 - p) / n).sqrt();
            ((p - h).max(0.0), (p + h).min(1.0))
        }
    });
    BerEstimate {
        errors,
        compared,
        ci,
    }
}

/// Counts differing bits (one bit per byte, as in [`crate::signal::BitStream`]).
pub fn count_ber(rx_bits: &[u8], tx_bits: &[u8]) -> Result<BerEstimate> {
    if rx_bits.len() != tx_bits.len() {
        return Err(Error::LengthMismatch {
            context: "bit streams",
            left: rx_bits.len(),
            right: tx_bits.len(),
        });
    }
    let errors = rx_bits
        .iter()
        .zip(tx_bits)
        .filter(|(a, b)| (*a & 1) != (*b & 1))
        .count();
    Ok(from_counts(errors, rx_bits.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub sync: SyncConfig,
    /// Symbols excluded at each end of the received block, where the
    /// circular simulation joins non-periodic phase noise.
    pub guard: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            sync: SyncConfig::default(),
            guard: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub ber: BerEstimate,
    /// Per received stream.
    pub stream_ber: Vec<BerEstimate>,
    /// Data-aided EVM pooled over streams, dB.
    pub evm_db: f64,
    /// `None` when synchronization failed; BER is then reported as 0.5.
    pub sync: Option<SyncResult>,
}

impl Measurement {
    pub fn sync_failed(&self) -> bool {
        self.sync.is_none()
    }

    fn failed(bits: usize, streams: usize) -> Self {
        let b = BerEstimate {
            errors: bits / 2,
            compared: bits,
            ci: None,
        };
        Self {
            ber: b,
            stream_ber: vec![b; streams],
            evm_db: 0.0,
            sync: None,
        }
    }
}

/// Synchronizes, resolves the quadrant ambiguity per sync block and counts
/// bit errors between received and reference symbols.
///
/// Bits are the constellation labels of the decided symbols, so the count
/// equals demapping both sides and comparing bit streams.
pub fn measure<T: Real>(
    rx: &[&[Complex<T>]],
    tx: &[&[Complex<T>]],
    c: &Constellation8Qam<T>,
    cfg: &MeasureConfig,
) -> Result<Measurement> {
    let n = tx.first().map_or(0, |s| s.len());
    if 2 * cfg.guard >= n {
        return Err(crate::error::invalid(
            "measure.guard",
            "leaves no symbols to compare",
        ));
    }
    let sync = match synchronize(rx, tx, &cfg.sync) {
        Ok(s) => s,
        Err(Error::SyncFailure(_)) => {
            return Ok(Measurement::failed(
                3 * (n - 2 * cfg.guard) * rx.len(),
                rx.len(),
            ))
        }
        Err(e) => return Err(e),
    };
    let c64 = Constellation8Qam::<f64>::new(c.geometry());
    let ps = c64.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 8.0;
    let mut total = from_counts(0, 0);
    let mut stream_ber = Vec::with_capacity(rx.len());
    let (mut err_pow, mut ref_pow) = (0.0, 0.0);
    for (r, a) in rx.iter().zip(&sync.streams) {
        let s = to_c64(tx[a.source]);
        let mut u = realign(r, a);
        let pu = crate::num::mean_power(&u);
        if !(pu > 0.0) {
            return Err(Error::ZeroPower);
        }
        let g = (ps / pu).sqrt();
        u.iter_mut().for_each(|v| *v *= g);
        for (ub, sb) in u.chunks_mut(cfg.sync.block).zip(s.chunks(cfg.sync.block)) {
            let corr: Complex<f64> = ub.iter().zip(sb).map(|(x, y)| x * y.conj()).sum();
            let q =
                ((-corr.arg() / std::f64::consts::FRAC_PI_2).round() as i64).rem_euclid(4) as u8;
            let rot = quarter(q);
            ub.iter_mut().for_each(|v| *v *= rot);
        }
        // received-block index of reference symbol k is k + delay
        let keep = |k: usize| {
            let i = (k + a.delay) % n;
            i >= cfg.guard && i < n - cfg.guard
        };
        let idx: Vec<usize> = (0..n).filter(|&k| keep(k)).collect();
        let num: Complex<f64> = idx.iter().map(|&k| s[k] * u[k].conj()).sum();
        let den: f64 = idx.iter().map(|&k| u[k].norm_sqr()).sum();
        let h = num / den;
        let mut errors = 0;
        for &k in &idx {
            let d = c64.decide(u[k]) ^ c64.decide(s[k]);
            errors += d.count_ones() as usize;
            err_pow += (u[k] * h - s[k]).norm_sqr();
            ref_pow += s[k].norm_sqr();
        }
        let b = from_counts(errors, 3 * idx.len());
        total = total.merge(&b);
        stream_ber.push(b);
    }
    Ok(Measurement {
        ber: total,
        stream_ber,
        evm_db: linear_to_db(err_pow / ref_pow),
        sync: Some(sync),
    })
}
