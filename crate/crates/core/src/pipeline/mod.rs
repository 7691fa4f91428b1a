//! End-to-end reconstruction: signals in, one completed point cloud out.
//!
//! [`run_pipeline`] chains normal-field estimation, potential integration,
//! isosurface sampling, completion and selection. Candidate and completed
//! clouds pass through the PLY encoding in memory, so a run resumed from
//! persisted intermediates reproduces a fresh run exactly.

mod benchmark;
mod config;
mod corpus;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use benchmark::{
    benchmark, read_scene, write_scene, Aggregate, BenchmarkSummary, CategoryMeans, SceneRow,
    AGGREGATE_FILE, RESULTS_FILE, SCENE_GROUND_TRUTH, SCENE_SIGNALS,
};
pub use config::{
    CompleterConfig, CompleterKind, CorpusConfig, PipelineConfig, ProposalConfig,
};
pub use corpus::{export_training_set, generate_corpus, CorpusSummary, MANIFEST_FILE};

use crate::completion::{
    complete_all, CompletedCandidate, Completer, ExchangeConfig, ExternalCompleter,
    MirrorCompleter,
};
use crate::error::{Error, Result};
use crate::geometry::OrientedPointCloud;
use crate::io::{ply_round_trip, read_cloud_ply, read_json, write_cloud_ply, write_json};
use crate::proposal::{
    default_reference, estimate_normal_field_with, integrate_potential, read_candidates,
    sample_isosurfaces, write_candidates, CandidateSet, NormalField, ScalarField,
};
use crate::radar::SignalSet;
use crate::selection::{select, SelectionReport};

pub const FINAL_FILE: &str = "final.ply";
pub const REPORT_FILE: &str = "report.json";
pub const INTERMEDIATES_DIR: &str = "intermediates";

const NORMAL_FIELD_FILE: &str = "normal_field.json";
const POTENTIAL_FILE: &str = "potential.json";
const CANDIDATES_DIR: &str = "candidates";
const COMPLETED_DIR: &str = "completed";
const COMPLETED_INDEX: &str = "completed.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where `final.ply` and `report.json` go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    pub keep_intermediates: bool,
    /// Reuse intermediates already present under `out_dir`.
    pub resume: bool,
    /// Prefix for completer request ids.
    pub request_prefix: String,
}

impl RunOptions {
    pub fn writing_to(dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    fn intermediates(&self) -> Option<PathBuf> {
        self.out_dir.as_ref().map(|d| d.join(INTERMEDIATES_DIR))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub final_cloud: OrientedPointCloud,
    pub report: SelectionReport,
    pub candidates: CandidateSet,
    pub completed: Vec<CompletedCandidate>,
}

#[derive(Serialize, Deserialize)]
struct CompletedRecord {
    file: String,
    source_index: usize,
    completer_tag: String,
}

/// The completer named by `config`.
pub fn make_completer(config: &CompleterConfig) -> Result<Box<dyn Completer>> {
    Ok(match config.kind {
        CompleterKind::Baseline => Box::new(MirrorCompleter::default()),
        CompleterKind::External => {
            let dir = config.exchange_dir.clone().ok_or_else(|| {
                Error::Config("the external completer needs an exchange directory".into())
            })?;
            let mut exchange = ExchangeConfig::new(dir);
            exchange.timeout = std::time::Duration::from_secs_f64(config.timeout_secs);
            Box::new(ExternalCompleter::new(exchange)?)
        }
    })
}

fn timed<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    log::info!(
        "stage={stage} status={} elapsed_ms={:.1}",
        if out.is_ok() { "ok" } else { "failed" },
        start.elapsed().as_secs_f64() * 1e3
    );
    out
}

/// Loads `path` when resuming and it exists, otherwise computes and, when
/// `path` is set, stores the result.
fn cached<T>(
    path: Option<&Path>,
    resume: bool,
    load: impl FnOnce(&Path) -> Result<T>,
    compute: impl FnOnce() -> Result<T>,
    store: impl FnOnce(&Path, &T) -> Result<()>,
) -> Result<T> {
    if let Some(p) = path.filter(|p| resume && p.exists()) {
        log::debug!("reusing {}", p.display());
        return load(p);
    }
    let value = compute()?;
    if let Some(p) = path {
        store(p, &value)?;
    }
    Ok(value)
}

fn quantize_set(set: CandidateSet) -> Result<CandidateSet> {
    let partials = set
        .partials()
        .iter()
        .map(ply_round_trip)
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(partials, set.iso_values().to_vec(), set.delta())
}

fn write_completed(dir: &Path, completed: &[CompletedCandidate]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = Vec::with_capacity(completed.len());
    for c in completed {
        let file = format!("completed_{:02}.ply", c.source_index);
        write_cloud_ply(dir.join(&file), &c.reconstruction)?;
        index.push(CompletedRecord {
            file,
            source_index: c.source_index,
            completer_tag: c.completer_tag.clone(),
        });
    }
    write_json(dir.join(COMPLETED_INDEX), &index)
}

fn read_completed(dir: &Path) -> Result<Vec<CompletedCandidate>> {
    let index: Vec<CompletedRecord> = read_json(dir.join(COMPLETED_INDEX))?;
    index
        .into_iter()
        .map(|r| {
            Ok(CompletedCandidate {
                reconstruction: read_cloud_ply(dir.join(&r.file))?,
                source_index: r.source_index,
                completer_tag: r.completer_tag,
            })
        })
        .collect()
}

/// Runs every stage on `signals`.
///
/// Errors carry the name of the stage that failed. With an output directory
/// the final cloud and selection report are written there, and with
/// `keep_intermediates` so is every stage's product.
pub fn run_pipeline(
    signals: &SignalSet,
    config: &PipelineConfig,
    completer: &dyn Completer,
    options: &RunOptions,
) -> Result<PipelineOutput> {
    config.validate()?;
    let grid = config.grid;
    let keep = options.keep_intermediates || options.resume;
    let stash = options.intermediates().filter(|_| keep);
    if let Some(dir) = &stash {
        fs::create_dir_all(dir)?;
    }
    let at = |name: &str| stash.as_ref().map(|d| d.join(name));
    let resume = options.resume;

    let field: NormalField = timed("normal-field", || {
        cached(
            at(NORMAL_FIELD_FILE).as_deref(),
            resume,
            |p| read_json(p),
            || {
                Ok(estimate_normal_field_with(
                    signals,
                    &grid,
                    config.proposal.confidence_percentile,
                ))
            },
            |p, v| write_json(p, v),
        )
    })?;
    if field.grid() != &grid {
        return Err(Error::Config("stored normal field uses a different grid".into())
            .in_stage("normal-field"));
    }

    let potential: ScalarField = timed("potential", || {
        cached(
            at(POTENTIAL_FILE).as_deref(),
            resume,
            |p| read_json(p),
            || integrate_potential(&field, default_reference(&grid)),
            |p, v| write_json(p, v),
        )
    })?;

    let candidates = timed("isosurfaces", || {
        cached(
            at(CANDIDATES_DIR).as_deref(),
            resume,
            |p| read_candidates(p),
            || {
                let delta = config.proposal.delta.unwrap_or(grid.spacing() / 2.0);
                quantize_set(sample_isosurfaces(
                    &potential,
                    &field,
                    config.proposal.num_candidates,
                    delta,
                )?)
            },
            |p, v| write_candidates(p, v).map(drop),
        )
    })?;

    let completed = timed("completion", || {
        cached(
            at(COMPLETED_DIR).as_deref(),
            resume,
            |p| read_completed(p),
            || {
                complete_all(&candidates, completer, &options.request_prefix)?
                    .into_iter()
                    .map(|mut c| {
                        c.reconstruction = ply_round_trip(&c.reconstruction)?;
                        Ok(c)
                    })
                    .collect()
            },
            |p, v| write_completed(p, v),
        )
    })?;

    let (final_cloud, report) = timed("selection", || {
        let partials: Vec<OrientedPointCloud> = completed
            .iter()
            .map(|c| candidates.partials()[c.source_index].clone())
            .collect();
        select(&completed, &partials, &grid, signals, &config.selection)
    })?;

    if let Some(dir) = &options.out_dir {
        timed("output", || {
            fs::create_dir_all(dir)?;
            write_cloud_ply(dir.join(FINAL_FILE), &final_cloud)?;
            write_json(dir.join(REPORT_FILE), &report)
        })?;
    }

    Ok(PipelineOutput {
        final_cloud,
        report,
        candidates,
        completed,
    })
}

#[cfg(test)]
mod tests;
