use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::Real;

/// Gram–Schmidt I/Q orthogonalization.
///
/// Removes the Q component correlated with I, then equalizes both
/// quadrature variances while keeping the total power of the block.
pub fn qi_compensate<T: Real>(x: &mut [Complex<T>]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let n = x.len() as f64;
    let total = x.iter().map(|v| v.norm_sqr().as_f64()).sum::<f64>() / n;
    let pi = x.iter().map(|v| v.re.as_f64().powi(2)).sum::<f64>() / n;
    if !(pi > 1e-30 * total) {
        return Err(Error::Degenerate("in-phase component has zero variance"));
    }
    let rho = x.iter().map(|v| v.re.as_f64() * v.im.as_f64()).sum::<f64>() / n / pi;
    let pq = x
        .iter()
        .map(|v| (v.im.as_f64() - rho * v.re.as_f64()).powi(2))
        .sum::<f64>()
        / n;
    if !(pq > 0.0) {
        return Err(Error::Degenerate("quadrature collapses onto in-phase"));
    }
    let gi = (0.5 * total / pi).sqrt();
    let gq = (0.5 * total / pq).sqrt();
    for v in x.iter_mut() {
        let (i, q) = (v.re.as_f64(), v.im.as_f64());
        *v = Complex::new(T::lit(i * gi), T::lit((q - rho * i) * gq));
    }
    Ok(())
}
