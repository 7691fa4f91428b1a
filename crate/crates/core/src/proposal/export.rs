//! Candidate sets on disk: one PLY per candidate plus `candidates.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CandidateSet;
use crate::error::Result;
use crate::io::{read_cloud_ply, read_json, write_cloud_ply, write_json};

pub const INDEX_FILE: &str = "candidates.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub file: String,
    pub iso_value: f64,
    pub delta: f64,
    pub num_points: usize,
}

pub fn write_candidates(dir: impl AsRef<Path>, set: &CandidateSet) -> Result<Vec<CandidateRecord>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(set.len());
    for (i, (cloud, iso)) in set.partials().iter().zip(set.iso_values()).enumerate() {
        let file = format!("candidate_{i:02}.ply");
        write_cloud_ply(dir.join(&file), cloud)?;
        records.push(CandidateRecord {
            file,
            iso_value: *iso,
            delta: set.delta(),
            num_points: cloud.len(),
        });
    }
    write_json(dir.join(INDEX_FILE), &records)?;
    Ok(records)
}

pub fn read_candidates(dir: impl AsRef<Path>) -> Result<CandidateSet> {
    let dir = dir.as_ref();
    let records: Vec<CandidateRecord> = read_json(dir.join(INDEX_FILE))?;
    let delta = records.first().map_or(f64::MIN_POSITIVE, |r| r.delta);
    let partials = records
        .iter()
        .map(|r| read_cloud_ply(dir.join(&r.file)))
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(partials, records.iter().map(|r| r.iso_value).collect(), delta)
}
