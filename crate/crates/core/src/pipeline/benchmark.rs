use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::Completer;
use crate::error::{Error, Result};
use crate::fixtures::FixtureScene;
use crate::geometry::OrientedPointCloud;
use crate::io::{read_cloud_ply, write_cloud_ply, write_json};
use crate::metrics::{evaluate_run, CoverageCategory, EvalMeta, SizeCategory};
use crate::radar::{read_signals, write_signals, SignalSet};
use crate::selection::Branch;

use super::{run_pipeline, PipelineConfig, RunOptions};

pub const SCENE_SIGNALS: &str = "signals.mmsig";
pub const SCENE_GROUND_TRUTH: &str = "ground_truth.ply";
pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";

/// One benchmark row; metric columns are empty when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub object_id: String,
    /// `ok`, or the error that stopped the run.
    pub status: String,
    pub chamfer: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fscore: Option<f64>,
    pub coverage_percent: Option<f64>,
    pub coverage_category: Option<CoverageCategory>,
    pub size_category: Option<SizeCategory>,
    /// Highest recall among the raw candidate partials.
    pub best_candidate_recall: Option<f64>,
    pub branch: Option<Branch>,
}

impl SceneRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryMeans {
    pub count: usize,
    pub chamfer: f64,
    pub fscore: f64,
    pub precision: f64,
    pub recall: f64,
}

impl CategoryMeans {
    fn of<'a>(rows: impl IntoIterator<Item = &'a SceneRow>) -> Self {
        let mut m = Self::default();
        for r in rows {
            m.count += 1;
            m.chamfer += r.chamfer.unwrap_or(0.0);
            m.fscore += r.fscore.unwrap_or(0.0);
            m.precision += r.precision.unwrap_or(0.0);
            m.recall += r.recall.unwrap_or(0.0);
        }
        if m.count > 0 {
            let n = m.count as f64;
            m.chamfer /= n;
            m.fscore /= n;
            m.precision /= n;
            m.recall /= n;
        }
        m
    }
}

/// Means over the successful rows, overall and per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenes: usize,
    pub failed: usize,
    pub overall: CategoryMeans,
    pub mean_best_candidate_recall: f64,
    pub by_size: BTreeMap<SizeCategory, CategoryMeans>,
    pub by_coverage: BTreeMap<CoverageCategory, CategoryMeans>,
}

impl Aggregate {
    pub fn from_rows(rows: &[SceneRow]) -> Self {
        let ok: Vec<&SceneRow> = rows.iter().filter(|r| r.is_ok()).collect();
        let mut by_size: BTreeMap<SizeCategory, Vec<&SceneRow>> = BTreeMap::new();
        let mut by_coverage: BTreeMap<CoverageCategory, Vec<&SceneRow>> = BTreeMap::new();
        for r in &ok {
            if let Some(s) = r.size_category {
                by_size.entry(s).or_default().push(r);
            }
            if let Some(c) = r.coverage_category {
                by_coverage.entry(c).or_default().push(r);
            }
        }
        let best: f64 = ok.iter().filter_map(|r| r.best_candidate_recall).sum();
        Self {
            scenes: rows.len(),
            failed: rows.len() - ok.len(),
            overall: CategoryMeans::of(ok.iter().copied()),
            mean_best_candidate_recall: if ok.is_empty() { 0.0 } else { best / ok.len() as f64 },
            by_size: by_size
                .into_iter()
                .map(|(k, v)| (k, CategoryMeans::of(v)))
                .collect(),
            by_coverage: by_coverage
                .into_iter()
                .map(|(k, v)| (k, CategoryMeans::of(v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub rows: Vec<SceneRow>,
    pub aggregate: Aggregate,
}

/// Stores a scene as `signals.mmsig` and `ground_truth.ply` under `dir`.
pub fn write_scene(dir: impl AsRef<Path>, scene: &FixtureScene) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_signals(dir.join(SCENE_SIGNALS), &scene.signals)?;
    write_cloud_ply(dir.join(SCENE_GROUND_TRUTH), &scene.ground_truth)
}

pub fn read_scene(dir: impl AsRef<Path>) -> Result<(SignalSet, OrientedPointCloud)> {
    let dir = dir.as_ref();
    Ok((
        read_signals(dir.join(SCENE_SIGNALS))?,
        read_cloud_ply(dir.join(SCENE_GROUND_TRUTH))?,
    ))
}

fn scene_dirs(scene_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(scene_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SCENE_SIGNALS).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn run_scene(
    dir: &Path,
    id: &str,
    out_dir: &Path,
    config: &PipelineConfig,
    completer: &dyn Completer,
) -> Result<SceneRow> {
    let (signals, gt) = read_scene(dir)?;
    let options = RunOptions {
        request_prefix: format!("{id}_"),
        ..RunOptions::writing_to(out_dir.join(id))
    };
    let output = run_pipeline(&signals, config, completer, &options)?;
    let observed = output
        .candidates
        .partials()
        .iter()
        .fold(OrientedPointCloud::from_points(Vec::new()), |acc, p| acc.merged(p));
    let meta = EvalMeta {
        threshold: config.metric_threshold,
        ..EvalMeta::for_object(id, &gt)
    };
    let report = evaluate_run(&output.final_cloud, &gt, &observed, &meta)?;
    let best_candidate_recall = output
        .candidates
        .partials()
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| evaluate_run(p, &gt, &observed, &meta).map(|r| r.recall))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SceneRow {
        object_id: id.to_string(),
        status: "ok".into(),
        chamfer: Some(report.chamfer),
        precision: Some(report.precision),
        recall: Some(report.recall),
        fscore: Some(report.fscore),
        coverage_percent: Some(report.coverage_percent),
        coverage_category: Some(report.coverage_category),
        size_category: Some(report.size_category),
        best_candidate_recall: Some(best_candidate_recall),
        branch: Some(output.report.branch),
    })
}

/// Reconstructs and scores every scene under `scene_dir`.
///
/// Each subdirectory holding a signal file is one scene. Per-scene outputs go
/// to `out_dir/<scene>/`, and the table and aggregate to `out_dir` itself.
/// A failed scene becomes a row whose status is the error message.
pub fn benchmark(
    scene_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    config: &PipelineConfig,
    completer: &dyn Completer,
) -> Result<BenchmarkSummary> {
    let scene_dir = scene_dir.as_ref();
    let out_dir = out_dir.as_ref();
    config.validate()?;
    let dirs = scene_dirs(scene_dir)?;
    if dirs.is_empty() {
        return Err(Error::NoScenes(scene_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir)?;
    let rows: Vec<SceneRow> = dirs
        .par_iter()
        .map(|dir| {
            let id = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let start = Instant::now();
            let row = run_scene(dir, &id, out_dir, config, completer).unwrap_or_else(|e| {
                log::warn!("scene {id} failed: {e}");
                SceneRow {
                    object_id: id.clone(),
                    status: e.to_string(),
                    chamfer: None,
                    precision: None,
                    recall: None,
                    fscore: None,
                    coverage_percent: None,
                    coverage_category: None,
                    size_category: None,
                    best_candidate_recall: None,
                    branch: None,
                }
            });
            log::info!(
                "scene={id} status={} elapsed_ms={:.1}",
                if row.is_ok() { "ok" } else { "failed" },
                start.elapsed().as_secs_f64() * 1e3
            );
            row
        })
        .collect();

    let mut csv = csv::Writer::from_path(out_dir.join(RESULTS_FILE))
        .map_err(|e| Error::Format(e.to_string()))?;
    for row in &rows {
        csv.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    csv.flush()?;
    let aggregate = Aggregate::from_rows(&rows);
    write_json(out_dir.join(AGGREGATE_FILE), &aggregate)?;
    Ok(BenchmarkSummary { rows, aggregate })
}
