//! JSON-lines manifest of exported training pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of objects assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One exported (partial, full) pair. Angles are in radians, `noise_sigma` in
/// unit-sphere units, and paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub partial_path: String,
    pub full_path: String,
    pub tau: f64,
    pub tau_h: f64,
    pub tau_v: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub split: Split,
}

/// Split labels for `n` objects: a seeded shuffle, the first 80% (rounded) train.
pub fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = (TRAIN_FRACTION * n as f64).round() as usize;
    let mut splits = vec![Split::Test; n];
    for &i in &order[..train] {
        splits[i] = Split::Train;
    }
    splits
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_objects_split_eight_two() {
        let s = assign_splits(10, 3);
        assert_eq!(s.iter().filter(|x| **x == Split::Train).count(), 8);
        assert_eq!(s, assign_splits(10, 3));
        assert_ne!(s, assign_splits(10, 4));
        assert_eq!(assign_splits(0, 1), vec![]);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![ManifestRecord {
            id: "cube_000".into(),
            partial_path: "cube_000.partial.ply".into(),
            full_path: "cube_000.full.ply".into(),
            tau: 0.5,
            tau_h: 1.0,
            tau_v: 1.5,
            noise_sigma: 0.01,
            seed: 42,
            split: Split::Test,
        }];
        let path = dir.path().join("manifest.jsonl");
        write_manifest(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"split\":\"test\""));
        assert_eq!(text.lines().count(), 1);
        assert_eq!(read_manifest(&path).unwrap(), records);
    }
}
