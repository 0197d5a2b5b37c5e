//! Plot-data export: constellations and Stokes parameters as CSV.

use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::{Constellation8Qam, JonesSignal};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        k => Error::Format(format!("{k:?}")),
    })
}

fn fmt(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Writes `re,im` rows, one per symbol, under a header.
pub fn export_constellation<T: Real>(symbols: &[Complex<T>], path: impl AsRef<Path>) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["re", "im"]).map_err(fmt)?;
    for s in symbols {
        w.write_record([s.re.as_f64().to_string(), s.im.as_f64().to_string()])
            .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// Normalized Stokes parameters per sample: `s1 = (|x|²−|y|²)/s0`,
/// `s2 = 2·Re(x·y*)/s0`, `s3 = 2·Im(x*·y)/s0`. Samples with zero power are
/// skipped.
pub fn stokes<T: Real>(j: &JonesSignal<T>) -> Vec<[f64; 4]> {
    j.x.samples()
        .iter()
        .zip(j.y.samples())
        .filter_map(|(x, y)| {
            let x = Complex::new(x.re.as_f64(), x.im.as_f64());
            let y = Complex::new(y.re.as_f64(), y.im.as_f64());
            let s0 = x.norm_sqr() + y.norm_sqr();
            (s0 > 0.0).then(|| {
                let c = x.conj() * y;
                [
                    s0,
                    (x.norm_sqr() - y.norm_sqr()) / s0,
                    2.0 * c.re / s0,
                    2.0 * c.im / s0,
                ]
            })
        })
        .collect()
}

pub fn export_stokes<T: Real>(j: &JonesSignal<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["s0", "s1", "s2", "s3"]).map_err(fmt)?;
    for s in stokes(j) {
        w.write_record(s.iter().map(|v| v.to_string()))
            .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// RMS distance of unit-power-normalized symbols to their nearest
/// constellation point.
pub fn cluster_rms_spread<T: Real>(
    symbols: &[Complex<T>],
    c: &Constellation8Qam<T>,
) -> Result<f64> {
    let p = crate::num::mean_power(symbols);
    if !(p > 0.0) {
        return Err(Error::ZeroPower);
    }
    let g = T::lit(p.sqrt().recip());
    let d: f64 = symbols
        .iter()
        .map(|&s| c.nearest_distance_sqr(s * g).as_f64())
        .sum();
    Ok((d / symbols.len() as f64).sqrt())
}
