//! `MMSIG1` binary signal files.
//!
//! Layout, all little-endian: 8-byte magic `MMSIG1\0\0`, `N: u64`, `T: u64`,
//! `start_frequency: f64`, `bandwidth: f64`, then `N·T` complex samples as
//! `(re: f32, im: f32)` in row-major order, then `N` sensor positions as
//! three `f64` each. The array boresight is not stored; readers assume the
//! downward-looking `−z`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{SensorArray, SignalSet, Waveform};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vector3};

pub(crate) const MAGIC: &[u8; 8] = b"MMSIG1\0\0";

pub fn write_signals(path: impl AsRef<Path>, signals: &SignalSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_signals_to(&mut out, signals)?;
    out.flush()?;
    Ok(())
}

pub fn write_signals_to<W: Write>(out: &mut W, signals: &SignalSet) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(signals.num_sensors() as u64).to_le_bytes())?;
    out.write_all(&(signals.num_samples() as u64).to_le_bytes())?;
    out.write_all(&signals.waveform().start_frequency().to_le_bytes())?;
    out.write_all(&signals.waveform().bandwidth().to_le_bytes())?;
    for z in signals.samples() {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())?;
    }
    for p in signals.array().positions() {
        for c in p.coords.iter() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_signals(path: impl AsRef<Path>) -> Result<SignalSet> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    read_signals_from(&mut reader).map_err(|e| match e {
        Error::Format(m) | Error::InvalidInput(m) => Error::parse(path, m),
        other => other,
    })
}

pub fn read_signals_from<R: Read>(reader: &mut R) -> Result<SignalSet> {
    let mut magic = [0u8; 8];
    read_exact(reader, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MMSIG1 file".into()));
    }
    let n = read_u64(reader)? as usize;
    let t = read_u64(reader)? as usize;
    let f0 = read_f64(reader)?;
    let bandwidth = read_f64(reader)?;
    let waveform = Waveform::new(f0, bandwidth, t)?;
    let count = n
        .checked_mul(t)
        .filter(|c| *c <= 1 << 34)
        .ok_or_else(|| Error::Format(format!("implausible size {n} × {t}")))?;

    let mut bytes = vec![0u8; count * 8];
    read_exact(reader, &mut bytes)?;
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let positions = (0..n)
        .map(|_| Ok(Point3::new(read_f64(reader)?, read_f64(reader)?, read_f64(reader)?)))
        .collect::<Result<Vec<_>>>()?;
    let array = SensorArray::new(positions, -Vector3::z())?;
    SignalSet::new(samples, array, waveform)
}

pub(crate) fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u64<R: Read>(reader: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(reader, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(reader: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(reader, &mut b)?;
    Ok(f64::from_le_bytes(b))
}
