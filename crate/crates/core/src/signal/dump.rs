//! Binary waveform dump used by per-stage and per-span taps.
//!
//! Layout (little-endian): 8-byte magic `CPDMWAVE`, `f64` sample rate,
//! `u64` sample count, 8 reserved zero bytes, then `count` interleaved
//! `(re, im)` pairs of `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::signal::waveform::ComplexWaveform;

pub const MAGIC: &[u8; 8] = b"CPDMWAVE";
pub const HEADER_LEN: usize = 32;

pub fn write_waveform<T: Real, W: Write>(w: &ComplexWaveform<T>, mut out: W) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(MAGIC);
    header[8..16].copy_from_slice(&w.sample_rate().to_le_bytes());
    header[16..24].copy_from_slice(&(w.len() as u64).to_le_bytes());
    out.write_all(&header)?;
    for s in w.samples() {
        out.write_all(&s.re.as_f64().to_le_bytes())?;
        out.write_all(&s.im.as_f64().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_waveform<T: Real, R: Read>(mut input: R) -> Result<ComplexWaveform<T>> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let rate = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let len = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let mut body = vec![0u8; len * 16];
    input
        .read_exact(&mut body)
        .map_err(|e| Error::Format(format!("truncated body: {e}")))?;
    let samples = body
        .chunks_exact(16)
        .map(|c| {
            Complex::new(
                T::lit(f64::from_le_bytes(c[..8].try_into().unwrap())),
                T::lit(f64::from_le_bytes(c[8..].try_into().unwrap())),
            )
        })
        .collect();
    ComplexWaveform::new(samples, rate)
}

pub fn save<T: Real>(w: &ComplexWaveform<T>, path: impl AsRef<Path>) -> Result<()> {
    write_waveform(w, BufWriter::new(File::create(path)?))
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<ComplexWaveform<T>> {
    read_waveform(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let w = ComplexWaveform::new(vec![Complex::new(1.5f64, -2.0)], 4e9).unwrap();
        let mut buf = Vec::new();
        write_waveform(&w, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16);
        assert_eq!(&buf[..8], b"CPDMWAVE");
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 4e9);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 1);
        assert_eq!(&buf[24..32], &[0u8; 8]);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(buf[40..48].try_into().unwrap()), -2.0);
        let back: ComplexWaveform<f64> = read_waveform(&buf[..]).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn rejects_garbage() {
        let mut buf = vec![0u8; 40];
        buf[..8].copy_from_slice(b"NOTAWAVE");
        assert!(matches!(
            read_waveform::<f64, _>(&buf[..]),
            Err(Error::Format(_))
        ));
        let w = ComplexWaveform::new(vec![Complex::new(1.0f64, 0.0); 3], 1.0).unwrap();
        let mut good = Vec::new();
        write_waveform(&w, &mut good).unwrap();
        good.truncate(good.len() - 4);
        assert!(read_waveform::<f64, _>(&good[..]).is_err());
    }
}
