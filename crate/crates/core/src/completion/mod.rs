//! Shape completion of candidate partial surfaces.
//!
//! Each candidate is normalized to the unit sphere, handed to a [`Completer`],
//! and the completer's output is mapped back to the original frame. The raw
//! candidate is never concatenated onto the result.

mod external;
mod mirror;
mod resample;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use external::{
    ExchangeConfig, ExchangeErrorRecord, ExchangePaths, ExchangeRequest, ExternalCompleter,
    DEFAULT_TIMEOUT, POLL_INTERVAL,
};
pub use mirror::{mirror_baseline_complete, MirrorCompleter, MIN_MIRROR_POINTS};
pub use resample::{deduplicate, farthest_point_sample};

use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, normalize_to_unit_sphere, OrientedPointCloud, RigidScale};
use crate::proposal::CandidateSet;

/// Cardinality of every completed reconstruction.
pub const OUTPUT_POINTS: usize = 2048;

/// Neighborhood size used to estimate normals for completer outputs that lack them.
const NORMAL_NEIGHBORS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub id: String,
    /// Partial surface in unit-sphere coordinates.
    pub partial: OrientedPointCloud,
    /// Maps unit-sphere coordinates back to the original frame.
    pub normalization: RigidScale,
}

impl CompletionRequest {
    pub fn new(id: impl Into<String>, partial: &OrientedPointCloud) -> Result<Self> {
        if partial.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let (unit, normalization) = normalize_to_unit_sphere(partial)?;
        Ok(Self {
            id: id.into(),
            partial: unit,
            normalization,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedCandidate {
    /// Completed shape in the original frame.
    pub reconstruction: OrientedPointCloud,
    pub source_index: usize,
    pub completer_tag: String,
}

/// Maps a unit-sphere partial to a complete unit-sphere shape.
pub trait Completer: Sync {
    fn tag(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> Result<OrientedPointCloud>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCompleter;

impl Completer for IdentityCompleter {
    fn tag(&self) -> &str {
        "identity"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<OrientedPointCloud> {
        Ok(request.partial.clone())
    }
}

/// Completes every non-empty candidate, in candidate order.
///
/// Request ids are `{id_prefix}{index:02}`. Outputs without normals get
/// normals estimated from their local neighborhoods.
pub fn complete_all(
    candidates: &CandidateSet,
    completer: &dyn Completer,
    id_prefix: &str,
) -> Result<Vec<CompletedCandidate>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let work: Vec<(usize, &OrientedPointCloud)> = candidates
        .partials()
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .collect();
    if work.is_empty() {
        return Err(Error::NoCandidates);
    }
    work.into_par_iter()
        .map(|(index, partial)| {
            complete_one(partial, completer, &format!("{id_prefix}{index:02}"))
                .map(|reconstruction| CompletedCandidate {
                    reconstruction,
                    source_index: index,
                    completer_tag: completer.tag().to_string(),
                })
                .map_err(|e| Error::CompleterFailure {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}

fn complete_one(
    partial: &OrientedPointCloud,
    completer: &dyn Completer,
    id: &str,
) -> Result<OrientedPointCloud> {
    let request = CompletionRequest::new(id, partial)?;
    let mut unit = completer.complete(&request)?;
    if unit.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if unit.normals().is_none() {
        unit = estimate_normals(&unit, NORMAL_NEIGHBORS)?;
    }
    Ok(request.normalization.apply(&unit))
}
