//! T/2-spaced butterfly equalizer: CMA acquisition, then radius-directed
//! (RDE) tracking on the two 8-QAM rings.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;

/// Passes added when outputs collapse onto one source during the output
/// pass.
const MAX_EXTRA_PASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqConfig {
    pub n_taps: usize,
    pub mu_cma: f64,
    pub mu_rde: f64,
    /// Symbols adapted with CMA before switching to RDE.
    pub stage1_len: usize,
    /// Minimum adaptation passes over the (periodic) block; output is taken
    /// from the last. Short blocks get extra passes so that stage 1 ends
    /// before the output pass begins.
    pub passes: usize,
    /// Tap-row correlation above which two outputs are taken to have locked
    /// onto the same source.
    pub singularity_threshold: f64,
}

impl Default for EqConfig {
    fn default() -> Self {
        Self {
            n_taps: 15,
            mu_cma: 1e-3,
            mu_rde: 5e-4,
            stage1_len: 20_000,
            passes: 2,
            singularity_threshold: 0.9,
        }
    }
}

impl EqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 || self.n_taps % 2 == 0 {
            return Err(invalid("eq.n_taps", "must be odd"));
        }
        if !(self.mu_cma > 0.0 && self.mu_cma < 1.0) || !(self.mu_rde > 0.0 && self.mu_rde < 1.0) {
            return Err(invalid("eq.mu", "step sizes must lie in (0, 1)"));
        }
        if self.passes == 0 {
            return Err(invalid("eq.passes", "must be at least 1"));
        }
        if !(self.singularity_threshold > 0.0 && self.singularity_threshold <= 1.0) {
            return Err(invalid("eq.singularity_threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqMode {
    Cma,
    Rde,
}

/// Tap matrix `w[out][in][tap]` and adaptation mode.
#[derive(Clone, Debug, PartialEq)]
pub struct EqualizerState<T> {
    pub taps: Vec<Vec<Vec<Complex<T>>>>,
    pub mode: EqMode,
    /// Mean squared radius error per pass.
    pub error_history: Vec<f64>,
}

impl<T: Real> EqualizerState<T> {
    /// Center spike on the diagonal, zero elsewhere.
    pub fn center_spike(m: usize, n_taps: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let mut taps = vec![vec![vec![zero; n_taps]; m]; m];
        for (i, row) in taps.iter_mut().enumerate() {
            row[i][n_taps / 2] = Complex::new(T::one(), T::zero());
        }
        Self {
            taps,
            mode: EqMode::Cma,
            error_history: Vec::new(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.taps
            .iter()
            .flatten()
            .flatten()
            .map(|c| c.norm_sqr().as_f64())
            .sum()
    }

    /// Largest normalized correlation between rows `a` and `b` over whole-
    /// symbol shifts (two taps): outputs locked onto the same source at
    /// different delays have shifted, not equal, tap rows.
    fn row_correlation(&self, a: usize, b: usize) -> f64 {
        let n = self.taps[a][0].len() as isize;
        let (mut na, mut nb) = (0.0, 0.0);
        for (ra, rb) in self.taps[a].iter().zip(&self.taps[b]) {
            na += ra.iter().map(|x| x.to_f64c().norm_sqr()).sum::<f64>();
            nb += rb.iter().map(|x| x.to_f64c().norm_sqr()).sum::<f64>();
        }
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let mut best = 0.0f64;
        for shift in (-(n / 2)..=n / 2).filter(|s| s % 2 == 0) {
            let mut dot = Complex::new(0.0, 0.0);
            for (ra, rb) in self.taps[a].iter().zip(&self.taps[b]) {
                for k in 0..n {
                    let j = k + shift;
                    if (0..n).contains(&j) {
                        dot += ra[k as usize].to_f64c().conj() * rb[j as usize].to_f64c();
                    }
                }
            }
            best = best.max(dot.norm());
        }
        best / (na * nb).sqrt()
    }

    /// Re-initializes row `b` orthogonal to row `a`.
    fn reinit_row(&mut self, a: usize, b: usize) {
        let m = self.taps.len();
        let n = self.taps[a][0].len();
        if m == 2 {
            // second row from the first: [−conj(w₁₂(N−1−k)), conj(w₁₁(N−1−k))]
            let (ax, ay) = (self.taps[a][0].clone(), self.taps[a][1].clone());
            for k in 0..n {
                self.taps[b][0][k] = -ay[n - 1 - k].conj();
                self.taps[b][1][k] = ax[n - 1 - k].conj();
            }
            return;
        }
        let flat = |r: &Vec<Vec<Complex<T>>>| -> Vec<Complex<f64>> {
            r.iter().flatten().map(|c| c.to_f64c()).collect()
        };
        let va = flat(&self.taps[a]);
        let vb = flat(&self.taps[b]);
        let na: f64 = va.iter().map(|c| c.norm_sqr()).sum();
        let nb: f64 = vb.iter().map(|c| c.norm_sqr()).sum();
        let p: Complex<f64> = va
            .iter()
            .zip(&vb)
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex<f64>>()
            / na;
        let mut v: Vec<Complex<f64>> = vb.iter().zip(&va).map(|(y, x)| y - p * x).collect();
        let nv: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if nv < 1e-6 * nb {
            // fully collapsed: fall back to the center spike of row b
            v.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            v[b * n + n / 2] = Complex::new(1.0, 0.0);
        } else {
            let s = (nb / nv).sqrt();
            v.iter_mut().for_each(|c| *c *= s);
        }
        for (j, row) in self.taps[b].iter_mut().enumerate() {
            for (k, t) in row.iter_mut().enumerate() {
                let c = v[j * n + k];
                *t = Complex::new(T::lit(c.re), T::lit(c.im));
            }
        }
    }

    /// Checks every output pair; returns the number of re-initialized rows.
    #[cfg(test)]
    fn fix_singularity(&mut self, threshold: f64) -> usize {
        self.fix_singularity_with(threshold, &[], 0)
    }

    /// As [`Self::fix_singularity`], also treating two outputs as collapsed
    /// when their first `valid` samples in `outputs` correlate above the
    /// threshold at some lag within the filter span. Tap rows alone miss
    /// collapses that differ only in the out-of-band part of the taps.
    fn fix_singularity_with(
        &mut self,
        threshold: f64,
        outputs: &[Vec<Complex<T>>],
        valid: usize,
    ) -> usize {
        let m = self.taps.len();
        let max_lag = self.taps[0][0].len() / 2;
        let mut fixed = 0;
        for a in 0..m {
            for b in a + 1..m {
                let collapsed = valid > 0
                    && outputs.len() == m
                    && output_correlation(&outputs[a][..valid], &outputs[b][..valid], max_lag)
                        > threshold;
                if collapsed || self.row_correlation(a, b) > threshold {
                    self.reinit_row(a, b);
                    if self.row_correlation(a, b) > threshold {
                        // a shifted copy survives projection: start over
                        let n = self.taps[b][0].len();
                        for (j, row) in self.taps[b].iter_mut().enumerate() {
                            row.iter_mut()
                                .for_each(|t| *t = Complex::new(T::zero(), T::zero()));
                            if j == b {
                                row[n / 2] = Complex::new(T::one(), T::zero());
                            }
                        }
                    }
                    fixed += 1;
                }
            }
        }
        fixed
    }
}

/// Largest normalized cross-correlation of two streams over lags up to
/// `max_lag` symbols (circular).
fn output_correlation<T: Real>(a: &[Complex<T>], b: &[Complex<T>], max_lag: usize) -> f64 {
    let n = a.len();
    let ea: f64 = a.iter().map(|v| v.to_f64c().norm_sqr()).sum();
    let eb: f64 = b.iter().map(|v| v.to_f64c().norm_sqr()).sum();
    if n == 0 || ea == 0.0 || eb == 0.0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    for lag in 0..=max_lag.min(n - 1) {
        for d in [lag, n - lag] {
            let dot: Complex<f64> = (0..n)
                .map(|k| a[k].to_f64c() * b[(k + d) % n].to_f64c().conj())
                .sum();
            best = best.max(dot.norm());
        }
    }
    best / (ea * eb).sqrt()
}

trait ToF64C {
    fn to_f64c(&self) -> Complex<f64>;
}

impl<T: Real> ToF64C for Complex<T> {
    fn to_f64c(&self) -> Complex<f64> {
        Complex::new(self.re.as_f64(), self.im.as_f64())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EqReport {
    /// Mean `(|y|² − R_d²)²` over the last quarter of the output pass, per
    /// output, with `R_d` the nearest ring.
    pub radius_error: Vec<f64>,
    /// Mean `(|y|² − R_cma)²` over the same span.
    pub cma_error: Vec<f64>,
    pub singularities: usize,
    pub final_mode: Option<EqMode>,
    pub tap_energy: f64,
}

impl EqReport {
    pub fn converged_error(&self) -> f64 {
        self.radius_error.iter().sum::<f64>() / self.radius_error.len().max(1) as f64
    }
}

/// Equalizes `bufs` (M channels at 2 sps, even samples on symbol centers)
/// with an M×M butterfly and returns M symbol streams at 1 sps. `radii`
/// are the constellation rings and `r_cma` the CMA modulus, both for unit
/// average power; the inputs are normalized to unit power per channel.
pub fn adaptive_equalize<T: Real>(
    bufs: &[Vec<Complex<T>>],
    cfg: &EqConfig,
    radii: &[f64],
    r_cma: f64,
) -> Result<(Vec<Vec<Complex<T>>>, EqualizerState<T>, EqReport)> {
    cfg.validate()?;
    let m = bufs.len();
    let Some(n) = bufs.first().map(Vec::len) else {
        return Err(Error::Empty);
    };
    if bufs.iter().any(|b| b.len() != n) {
        return Err(Error::LengthMismatch {
            context: "equalizer channels",
            left: n,
            right: bufs.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    if n % 2 != 0 || n < 2 * cfg.n_taps {
        return Err(invalid(
            "equalizer input",
            format!("length {n} must be even and ≥ 2·n_taps"),
        ));
    }
    if radii.is_empty() {
        return Err(invalid("radii", "need at least one ring"));
    }
    let x: Vec<Vec<Complex<T>>> = bufs
        .iter()
        .map(|b| {
            let p = crate::num::mean_power(b);
            if !(p > 0.0) {
                return Err(Error::ZeroPower);
            }
            let s = T::lit(p.sqrt().recip());
            Ok(b.iter().map(|&v| v * s).collect())
        })
        .collect::<Result<_>>()?;
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let nearest = |p: f64| -> f64 {
        *r2.iter()
            .min_by(|a, b| (p - **a).abs().partial_cmp(&(p - **b).abs()).unwrap())
            .unwrap()
    };
    let n_sym = n / 2;
    let nt = cfg.n_taps;
    let half = nt / 2;
    let mut st = EqualizerState::<T>::center_spike(m, nt);
    let mut out = vec![vec![Complex::new(T::zero(), T::zero()); n_sym]; m];
    let mut report = EqReport::default();
    let mut seen = 0usize;
    let mut window = vec![vec![Complex::new(T::zero(), T::zero()); nt]; m];
    let mut passes = if cfg.stage1_len < usize::MAX / 2 {
        cfg.passes.max(cfg.stage1_len.div_ceil(n_sym) + 1)
    } else {
        cfg.passes
    };
    let max_passes = passes + MAX_EXTRA_PASSES;
    let mut pass = 0;
    while pass < passes {
        let last = pass + 1 == passes;
        let mut err_acc = 0.0;
        for k in 0..n_sym {
            st.mode = if seen < cfg.stage1_len {
                EqMode::Cma
            } else {
                EqMode::Rde
            };
            let c = 2 * k + n;
            for (j, w) in window.iter_mut().enumerate() {
                for (t, v) in w.iter_mut().enumerate() {
                    *v = x[j][(c + t - half) % n];
                }
            }
            for i in 0..m {
                let mut y = Complex::new(T::zero(), T::zero());
                for j in 0..m {
                    for (t, v) in st.taps[i][j].iter().zip(&window[j]) {
                        y += *t * *v;
                    }
                }
                let p = y.norm_sqr().as_f64();
                let (target, mu) = match st.mode {
                    EqMode::Cma => (r_cma, cfg.mu_cma),
                    EqMode::Rde => (nearest(p), cfg.mu_rde),
                };
                let g = p - target;
                err_acc += g * g;
                let e = y * T::lit(mu * g);
                for j in 0..m {
                    for (t, v) in st.taps[i][j].iter_mut().zip(&window[j]) {
                        *t -= e * v.conj();
                    }
                }
                out[i][k] = y;
            }
            seen += 1;
            if seen == cfg.stage1_len.min(n_sym) || (k + 1 == n_sym && !last) {
                let valid = if pass == 0 { k + 1 } else { n_sym };
                report.singularities +=
                    st.fix_singularity_with(cfg.singularity_threshold, &out, valid);
            }
        }
        let mse = err_acc / (n_sym * m) as f64;
        if !mse.is_finite() {
            return Err(Error::Degenerate("equalizer taps diverged"));
        }
        st.error_history.push(mse);
        if last && passes < max_passes {
            // outputs that collapsed during the output pass get another one
            let fixed = st.fix_singularity_with(cfg.singularity_threshold, &out, n_sym);
            if fixed > 0 {
                report.singularities += fixed;
                passes += 1;
            }
        }
        pass += 1;
    }
    let tail = n_sym - n_sym / 4;
    for y in &out {
        let (mut re, mut ce) = (0.0, 0.0);
        for v in &y[tail..] {
            let p = v.norm_sqr().as_f64();
            re += (p - nearest(p)).powi(2);
            ce += (p - r_cma).powi(2);
        }
        let cnt = (n_sym - tail).max(1) as f64;
        report.radius_error.push(re / cnt);
        report.cma_error.push(ce / cnt);
    }
    report.final_mode = Some(st.mode);
    report.tap_energy = st.energy();
    Ok((out, st, report))
}
