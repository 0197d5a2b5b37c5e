//! The recirculating loop: N × (fiber → EDFA), then the band-pass filter.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::amplifier::{edfa, AmplifierParams};
use crate::channel::fiber::{ssfm_propagate, FiberParams, SsfmStats, StepRule};
use crate::channel::filter::{obpf, FilterShape};
use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::signal::fft::{angular_frequencies, FftPair};
use crate::signal::OpticalField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObpfParams {
    pub bandwidth_hz: f64,
    pub shape: FilterShape,
    /// Filter after every amplifier instead of once at the end.
    pub per_span: bool,
}

impl Default for ObpfParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 100e9,
            shape: FilterShape::Rect,
            per_span: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkPlan {
    pub span_length_km: f64,
    pub n_spans: usize,
    pub obpf: Option<ObpfParams>,
    pub step: StepRule,
    /// Random unitary polarization rotation after each span.
    pub polarization_rotation: bool,
    /// First-order PMD: differential group delay per span, ps.
    pub dgd_ps_per_span: f64,
}

impl Default for LinkPlan {
    fn default() -> Self {
        Self {
            span_length_km: 80.0,
            n_spans: 10,
            obpf: Some(ObpfParams::default()),
            step: StepRule::default(),
            polarization_rotation: true,
            dgd_ps_per_span: 0.0,
        }
    }
}

impl LinkPlan {
    pub fn total_km(&self) -> f64 {
        self.span_length_km * self.n_spans as f64
    }
}

/// SplitMix64 finalizer over a seed and two tags; used for per-stage seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Haar-random SU(2) matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng) -> [[Complex<f64>; 2]; 2] {
    let g: Vec<f64> = (0..4).map(|_| f64::std_normal(rng)).collect();
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = Complex::new(g[0] / n, g[1] / n);
    let b = Complex::new(g[2] / n, g[3] / n);
    [[a, -b.conj()], [b, a.conj()]]
}

fn cast2<T: Real>(m: [[Complex<f64>; 2]; 2]) -> [[Complex<T>; 2]; 2] {
    m.map(|r| r.map(|v| Complex::new(T::lit(v.re), T::lit(v.im))))
}

/// First-order PMD: delay `±τ/2` between the eigenstates of `u`.
fn apply_dgd<T: Real>(field: &mut OpticalField<T>, dgd_s: f64, u: [[Complex<f64>; 2]; 2]) {
    let n = field.len();
    let w = angular_frequencies(n, field.sample_rate());
    let uh = [
        [u[0][0].conj(), u[1][0].conj()],
        [u[0][1].conj(), u[1][1].conj()],
    ];
    let mut fft = FftPair::<T>::new(n);
    for pair in field.pairs_mut() {
        pair.transform(cast2(uh));
        let (x, y) = (pair.x.samples_mut(), pair.y.samples_mut());
        fft.forward(x);
        fft.forward(y);
        for k in 0..n {
            let p = 0.5 * w[k] * dgd_s;
            let (s, c) = p.sin_cos();
            x[k] = x[k] * Complex::new(T::lit(c), T::lit(-s));
            y[k] = y[k] * Complex::new(T::lit(c), T::lit(s));
        }
        fft.inverse(x);
        fft.inverse(y);
        pair.transform(cast2(u));
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub spans: Vec<SsfmStats>,
}

/// Runs the loop and calls `tap(span_index, &field)` after every amplifier
/// (before the final band-pass filter). Span `k` uses seeds derived from
/// `(seed, k)` only, so a link of `m < N` spans is bit-identical to the
/// first `m` taps of a longer one.
pub fn run_link_with_taps<T: Real, F>(
    field: &OpticalField<T>,
    plan: &LinkPlan,
    fiber: &FiberParams,
    amp: &AmplifierParams,
    seed: u64,
    mut tap: F,
) -> Result<(OpticalField<T>, LinkStats)>
where
    F: FnMut(usize, &OpticalField<T>) -> Result<()>,
{
    if (plan.span_length_km - fiber.length_km).abs() > 1e-9 * fiber.length_km.max(1.0) {
        return Err(Error::PlanMismatch {
            plan_km: plan.span_length_km,
            link_km: fiber.length_km,
        });
    }
    if !(plan.dgd_ps_per_span >= 0.0) {
        return Err(invalid("dgd_ps_per_span", "must be non-negative"));
    }
    let amp = amp.resolved(fiber.span_loss_db());
    amp.validate()?;
    let mut cur = field.clone();
    let mut stats = LinkStats::default();
    for k in 0..plan.n_spans {
        let (next, st) = ssfm_propagate(&cur, fiber, plan.step)?;
        cur = next;
        stats.spans.push(st);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64, 1));
        if plan.dgd_ps_per_span > 0.0 {
            let u = random_unitary(&mut rng);
            apply_dgd(&mut cur, plan.dgd_ps_per_span * 1e-12, u);
        }
        if plan.polarization_rotation {
            let u = cast2(random_unitary(&mut rng));
            for pair in cur.pairs_mut() {
                pair.transform(u);
            }
        }
        let a = AmplifierParams {
            seed: derive_seed(seed, k as u64, 2),
            ..amp
        };
        cur = edfa(&cur, &a)?;
        if let Some(f) = plan.obpf.filter(|f| f.per_span) {
            cur = obpf(&cur, f.bandwidth_hz, f.shape)?;
        }
        tap(k, &cur)?;
    }
    if let Some(f) = plan.obpf.filter(|f| !f.per_span && plan.n_spans > 0) {
        cur = obpf(&cur, f.bandwidth_hz, f.shape)?;
    }
    Ok((cur, stats))
}

pub fn run_link<T: Real>(
    field: &OpticalField<T>,
    plan: &LinkPlan,
    fiber: &FiberParams,
    amp: &AmplifierParams,
    seed: u64,
) -> Result<OpticalField<T>> {
    run_link_with_taps(field, plan, fiber, amp, seed, |_, _| Ok(())).map(|r| r.0)
}
