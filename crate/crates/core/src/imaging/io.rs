//! `MMVOL1` binary volume files.
//!
//! Layout, little-endian: 8-byte magic `MMVOL1\0\0`, origin as three `f64`,
//! spacing `f64`, dims as three `u64`, then one `(re: f32, im: f32)` pair per
//! voxel in linear-index order (x fastest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{ComplexVolume, VoxelGridSpec};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::radar::io::{read_exact, read_f64, read_u64};

const MAGIC: &[u8; 8] = b"MMVOL1\0\0";

pub fn write_volume(path: impl AsRef<Path>, volume: &ComplexVolume) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_volume_to(&mut out, volume)?;
    out.flush()?;
    Ok(())
}

pub fn write_volume_to<W: Write>(out: &mut W, volume: &ComplexVolume) -> Result<()> {
    let grid = volume.grid();
    out.write_all(MAGIC)?;
    for c in grid.origin().coords.iter() {
        out.write_all(&c.to_le_bytes())?;
    }
    out.write_all(&grid.spacing().to_le_bytes())?;
    for d in grid.dims() {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for z in volume.values() {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ComplexVolume> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    read_volume_from(&mut reader).map_err(|e| match e {
        Error::Format(m) | Error::InvalidInput(m) => Error::parse(path, m),
        other => other,
    })
}

pub fn read_volume_from<R: Read>(reader: &mut R) -> Result<ComplexVolume> {
    let mut magic = [0u8; 8];
    read_exact(reader, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MMVOL1 file".into()));
    }
    let origin = Point3::new(read_f64(reader)?, read_f64(reader)?, read_f64(reader)?);
    let spacing = read_f64(reader)?;
    let dims = [
        read_u64(reader)? as usize,
        read_u64(reader)? as usize,
        read_u64(reader)? as usize,
    ];
    let count = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .filter(|c| *c <= 1 << 34)
        .ok_or_else(|| Error::Format(format!("implausible dims {dims:?}")))?;
    let grid = VoxelGridSpec::new(origin, spacing, dims)?;
    let mut bytes = vec![0u8; count * 8];
    read_exact(reader, &mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
            )
        })
        .collect();
    ComplexVolume::new(grid, values)
}
