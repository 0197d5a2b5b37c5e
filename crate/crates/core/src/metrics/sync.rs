//! Frame synchronization of received symbol streams against the reference.
//!
//! Each received stream is matched to a transmitted one by circular
//! cross-correlation, searching delay, quarter-turn rotation, conjugation
//! and stream assignment. The reported correlation is block-coherent: the
//! magnitudes of per-block correlations are summed, so a cycle slip in the
//! middle of the block does not destroy the match.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::fft::FftPair;

type C = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    /// Minimum normalized correlation of every assigned stream.
    pub threshold: f64,
    pub min_symbols: usize,
    /// Block length for the block-coherent correlation and the per-block
    /// quadrant resolution used in error counting.
    pub block: usize,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            min_symbols: 4096,
            block: 1024,
        }
    }
}

/// How one received stream lines up with the reference:
/// `rx[k] ≈ j^rotation · f(tx[source][k − delay])`, with `f` conjugation
/// when `conjugate` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamAlignment {
    pub source: usize,
    pub delay: usize,
    /// Multiple of π/2.
    pub rotation: u8,
    pub conjugate: bool,
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// One entry per received stream.
    pub streams: Vec<StreamAlignment>,
}

impl SyncResult {
    pub fn min_correlation(&self) -> f64 {
        self.streams
            .iter()
            .map(|s| s.correlation)
            .fold(f64::INFINITY, f64::min)
    }

    /// Source index of each received stream.
    pub fn permutation(&self) -> Vec<usize> {
        self.streams.iter().map(|s| s.source).collect()
    }
}

pub(crate) fn to_c64<T: Real>(x: &[Complex<T>]) -> Vec<C> {
    x.iter()
        .map(|v| Complex::new(v.re.as_f64(), v.im.as_f64()))
        .collect()
}

pub(crate) fn quarter(q: u8) -> C {
    [
        C::new(1.0, 0.0),
        C::new(0.0, 1.0),
        C::new(-1.0, 0.0),
        C::new(0.0, -1.0),
    ][(q % 4) as usize]
}

/// Best alignment of `rx` against one candidate source.
fn align(
    rx: &[C],
    rx_spec: &[C],
    tx: &[C],
    conjugate: bool,
    block: usize,
    fft: &mut FftPair<f64>,
) -> StreamAlignment {
    let n = rx.len();
    let t: Vec<C> = if conjugate {
        tx.iter().map(|v| v.conj()).collect()
    } else {
        tx.to_vec()
    };
    let mut ts = t.clone();
    fft.forward(&mut ts);
    // c[d] = Σ rx[k]·conj(t[k−d])
    let mut c: Vec<C> = rx_spec.iter().zip(&ts).map(|(a, b)| a * b.conj()).collect();
    fft.inverse(&mut c);
    let (delay, peak) = c
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
        .map(|(d, v)| (d, *v))
        .unwrap();
    let rotation = ((peak.arg() / std::f64::consts::FRAC_PI_2).round() as i64).rem_euclid(4) as u8;
    let prx: f64 = rx.iter().map(|v| v.norm_sqr()).sum();
    let ptx: f64 = t.iter().map(|v| v.norm_sqr()).sum();
    let mut acc = 0.0;
    let mut k = 0;
    while k < n {
        let end = (k + block).min(n);
        let s: C = (k..end)
            .map(|i| rx[i] * t[(i + n - delay) % n].conj())
            .sum();
        acc += s.norm();
        k = end;
    }
    StreamAlignment {
        source: 0,
        delay,
        rotation,
        conjugate,
        correlation: acc / (prx * ptx).sqrt(),
    }
}

/// Injective assignment of rows to columns maximizing the summed score.
fn best_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    fn go(
        row: usize,
        score: &[Vec<f64>],
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == score.len() {
            let s: f64 = cur.iter().enumerate().map(|(i, &j)| score[i][j]).sum();
            if s > best.0 {
                *best = (s, cur.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(row + 1, score, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let cols = score.first().map_or(0, Vec::len);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(0, score, &mut vec![false; cols], &mut Vec::new(), &mut best);
    best.1
}

/// Aligns every received stream with a distinct reference stream.
///
/// Fails with [`Error::SyncFailure`] when any assigned stream correlates
/// below the threshold.
pub fn synchronize<T: Real>(
    rx: &[&[Complex<T>]],
    tx: &[&[Complex<T>]],
    cfg: &SyncConfig,
) -> Result<SyncResult> {
    if rx.is_empty() || tx.is_empty() {
        return Err(Error::Empty);
    }
    if rx.len() > tx.len() {
        return Err(Error::LengthMismatch {
            context: "more received than transmitted streams",
            left: rx.len(),
            right: tx.len(),
        });
    }
    if cfg.block == 0 {
        return Err(invalid("sync.block", "must be positive"));
    }
    let n = tx[0].len();
    for s in rx.iter().chain(tx) {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                context: "synchronized streams",
                left: s.len(),
                right: n,
            });
        }
    }
    if n < cfg.min_symbols {
        return Err(invalid(
            "rx_symbols",
            format!("{n} symbols; at least {} needed", cfg.min_symbols),
        ));
    }
    let rx: Vec<Vec<C>> = rx.iter().map(|s| to_c64(s)).collect();
    let tx: Vec<Vec<C>> = tx.iter().map(|s| to_c64(s)).collect();
    let mut fft = FftPair::<f64>::new(n);
    let mut table: Vec<Vec<StreamAlignment>> = Vec::with_capacity(rx.len());
    for r in &rx {
        let mut rs = r.clone();
        fft.forward(&mut rs);
        let row = tx
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let a = align(r, &rs, t, false, cfg.block, &mut fft);
                let b = align(r, &rs, t, true, cfg.block, &mut fft);
                let best = if b.correlation > a.correlation { b } else { a };
                StreamAlignment { source: j, ..best }
            })
            .collect();
        table.push(row);
    }
    let score: Vec<Vec<f64>> = table
        .iter()
        .map(|r| r.iter().map(|a| a.correlation).collect())
        .collect();
    let assign = best_assignment(&score);
    let result = SyncResult {
        streams: assign
            .iter()
            .enumerate()
            .map(|(i, &j)| table[i][j])
            .collect(),
    };
    let worst = result.min_correlation();
    if !(worst >= cfg.threshold) {
        return Err(Error::SyncFailure(worst));
    }
    Ok(result)
}

/// Maps a received stream back onto the reference time base and phase:
/// `out[k] = f⁻¹(rx[k + delay] · j^−rotation)`.
pub fn realign<T: Real>(rx: &[Complex<T>], a: &StreamAlignment) -> Vec<Complex<f64>> {
    let n = rx.len();
    let r = quarter(4 - a.rotation % 4);
    (0..n)
        .map(|k| {
            let v = rx[(k + a.delay) % n];
            let v = Complex::new(v.re.as_f64(), v.im.as_f64()) * r;
            if a.conjugate {
                v.conj()
            } else {
                v
            }
        })
        .collect()
}
