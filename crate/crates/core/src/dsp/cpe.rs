//! Blind phase search carrier-phase estimation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::Constellation8Qam;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpeConfig {
    /// Number of test phases `B` over one symmetry sector.
    pub b_test_phases: usize,
    /// Length of the centered summation window, symbols.
    pub window: usize,
    /// Rotational symmetry of the constellation.
    pub symmetry_order: usize,
}

impl Default for CpeConfig {
    fn default() -> Self {
        Self {
            b_test_phases: 32,
            window: 64,
            symmetry_order: 4,
        }
    }
}

impl CpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_test_phases < 8 {
            return Err(invalid("cpe.b_test_phases", "must be at least 8"));
        }
        if self.window == 0 {
            return Err(invalid("cpe.window", "must be at least 1"));
        }
        if self.symmetry_order == 0 {
            return Err(invalid("cpe.symmetry_order", "must be at least 1"));
        }
        Ok(())
    }

    /// Phase sector width `2π/symmetry`.
    pub fn sector(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.symmetry_order as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CpeTrack {
    /// Unwrapped phase removed from each symbol, rad.
    pub phase: Vec<f64>,
    /// Abrupt jumps of more than half a sector in the unwrapped phase.
    pub cycle_slips: usize,
    /// Mean |Δφ| between consecutive symbols, rad.
    pub mean_step: f64,
}

/// Raw per-symbol estimates on the grid `−sector/2 + b·sector/B`.
pub fn bps_raw<T: Real>(
    y: &[Complex<T>],
    c: &Constellation8Qam<T>,
    cfg: &CpeConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let bt = cfg.b_test_phases;
    let sector = cfg.sector();
    let phases: Vec<f64> = (0..bt)
        .map(|b| -0.5 * sector + b as f64 * sector / bt as f64)
        .collect();
    let rot: Vec<Complex<T>> = phases
        .iter()
        .map(|&p| Complex::new(T::lit(p.cos()), T::lit(-p.sin())))
        .collect();
    // d[b][k]
    let d: Vec<Vec<f64>> = rot
        .iter()
        .map(|r| {
            y.iter()
                .map(|&v| c.nearest_distance_sqr(v * *r).as_f64())
                .collect()
        })
        .collect();
    // centered window, shifted inward at the block edges: the phase noise
    // is not periodic over the block
    let w = cfg.window.min(n);
    let lead = w / 2;
    let prefix: Vec<Vec<f64>> = d
        .iter()
        .map(|db| {
            std::iter::once(0.0)
                .chain(db.iter().scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                }))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lo = k.saturating_sub(lead).min(n - w);
        let best = (0..bt)
            .min_by(|&a, &b| {
                let sa = prefix[a][lo + w] - prefix[a][lo];
                let sb = prefix[b][lo + w] - prefix[b][lo];
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        out.push(phases[best]);
    }
    Ok(out)
}

/// Unwraps raw estimates in steps of `sector`.
pub fn unwrap_sector(raw: &[f64], sector: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in raw {
        if let Some(q) = prev {
            offset += ((q - (p + offset)) / sector).round() * sector;
        }
        let v = p + offset;
        out.push(v);
        prev = Some(v);
    }
    out
}

/// Counts slips: points where the means of the `len` symbols before and
/// after differ by more than half a sector. A phase that merely drifts
/// across a sector boundary is not counted.
pub fn count_slips(phase: &[f64], sector: f64, len: usize) -> usize {
    let n = phase.len();
    let len = len.max(1);
    if n < 2 * len {
        return 0;
    }
    let mut prefix = vec![0.0; n + 1];
    for (k, p) in phase.iter().enumerate() {
        prefix[k + 1] = prefix[k] + p;
    }
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;
    let mut slips = 0;
    let mut k = len;
    while k + len <= n {
        if (mean(k, k + len) - mean(k - len, k)).abs() > 0.5 * sector {
            slips += 1;
            k += 2 * len;
        } else {
            k += 1;
        }
    }
    slips
}

/// Estimates and removes the carrier phase of one 1-sps stream. The
/// input is normalized to unit power before the search; the output keeps
/// the input scale.
pub fn cpe_bps<T: Real>(
    y: &mut [Complex<T>],
    c: &Constellation8Qam<T>,
    cfg: &CpeConfig,
) -> Result<CpeTrack> {
    let p = crate::num::mean_power(y);
    if !(p > 0.0) {
        return Err(Error::ZeroPower);
    }
    let g = T::lit(p.sqrt().recip());
    let norm: Vec<Complex<T>> = y.iter().map(|&v| v * g).collect();
    let raw = bps_raw(&norm, c, cfg)?;
    let phase = unwrap_sector(&raw, cfg.sector());
    let slips = count_slips(&phase, cfg.sector(), cfg.window);
    for (v, &ph) in y.iter_mut().zip(&phase) {
        *v = *v * Complex::new(T::lit(ph.cos()), T::lit(-ph.sin()));
    }
    let mean_step = if phase.len() > 1 {
        phase.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (phase.len() - 1) as f64
    } else {
        0.0
    };
    Ok(CpeTrack {
        phase,
        cycle_slips: slips,
        mean_step,
    })
}
