use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::completion::farthest_point_sample;
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, normalize_to_unit_sphere, sample_surface};
use crate::io::{read_cloud_ply, write_cloud_ply};
use crate::synth::manifest::{assign_splits, read_manifest, write_manifest};
use crate::synth::{synthesize_partial, ManifestRecord, VisibilityParams};

use super::CorpusConfig;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const PAIRS_DIR: &str = "pairs";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub records: Vec<ManifestRecord>,
    /// Objects that failed to load or synthesize, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn mesh_files(mesh_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(mesh_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "obj" | "ply"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn object_ids(files: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    files
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let stem = f
                .file_stem()
                .map(|s| s.to_string_lossy().replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_"))
                .unwrap_or_default();
            if seen.insert(stem.clone()) {
                stem
            } else {
                format!("{stem}_{i}")
            }
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

struct Pair {
    id: String,
    params: VisibilityParams,
    seed: u64,
}

fn synthesize_object(
    mesh_path: &Path,
    id: &str,
    pairs_dir: &Path,
    config: &CorpusConfig,
    mut rng: ChaCha8Rng,
) -> Result<Pair> {
    let params = VisibilityParams {
        tau: draw(&mut rng, config.tau),
        tau_h: draw(&mut rng, config.tau_h),
        tau_v: draw(&mut rng, config.tau_v),
        noise_sigma: draw(&mut rng, config.noise_sigma),
        dropout_fraction: config.dropout_fraction,
        ..VisibilityParams::default()
    };
    let sample_seed: u64 = rng.gen();
    let seed: u64 = rng.gen();
    let mesh = load_mesh(mesh_path)?;
    let (unit, _) = normalize_to_unit_sphere(&sample_surface(&mesh, config.points, sample_seed)?)?;
    let (partial, full) = synthesize_partial(&unit, &config.array.build()?, &params, seed)?;
    write_cloud_ply(pairs_dir.join(format!("{id}.partial.ply")), &partial)?;
    write_cloud_ply(pairs_dir.join(format!("{id}.full.ply")), &full)?;
    Ok(Pair {
        id: id.to_string(),
        params,
        seed,
    })
}

/// Turns every OBJ/PLY mesh in `mesh_dir` into a (partial, full) training pair.
///
/// Objects are processed in sorted file order; each draws from its own stream
/// of the seeded generator, so results do not depend on scheduling. Failed
/// objects are skipped and the rest are split 80/20 into train and test.
pub fn generate_corpus(
    mesh_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    config: &CorpusConfig,
    seed: u64,
) -> Result<CorpusSummary> {
    let mesh_dir = mesh_dir.as_ref();
    let out_dir = out_dir.as_ref();
    config.validate()?;
    let files = mesh_files(mesh_dir)?;
    if files.is_empty() {
        return Err(Error::NoMeshes(mesh_dir.to_path_buf()));
    }
    let pairs_dir = out_dir.join(PAIRS_DIR);
    fs::create_dir_all(&pairs_dir)?;
    let ids = object_ids(&files);

    let results: Vec<Result<Pair>> = files
        .par_iter()
        .zip(&ids)
        .enumerate()
        .map(|(i, (file, id))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            synthesize_object(file, id, &pairs_dir, config, rng)
        })
        .collect();

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (file, result) in files.iter().zip(results) {
        match result {
            Ok(pair) => pairs.push(pair),
            Err(e) => {
                log::warn!("skipping {}: {e}", file.display());
                skipped.push((file.clone(), e.to_string()));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoMeshes(mesh_dir.to_path_buf()));
    }
    let splits = assign_splits(pairs.len(), seed);
    let records: Vec<ManifestRecord> = pairs
        .into_iter()
        .zip(splits)
        .map(|(p, split)| ManifestRecord {
            partial_path: format!("{PAIRS_DIR}/{}.partial.ply", p.id),
            full_path: format!("{PAIRS_DIR}/{}.full.ply", p.id),
            id: p.id,
            tau: p.params.tau,
            tau_h: p.params.tau_h,
            tau_v: p.params.tau_v,
            noise_sigma: p.params.noise_sigma,
            seed: p.seed,
            split,
        })
        .collect();
    write_manifest(out_dir.join(MANIFEST_FILE), &records)?;
    log::info!(
        "corpus: {} pairs written, {} objects skipped",
        records.len(),
        skipped.len()
    );
    Ok(CorpusSummary { records, skipped })
}

/// Copies a corpus with every cloud resampled to a fixed size by farthest-point
/// sampling, writing a new manifest beside the copies.
pub fn export_training_set(
    manifest: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    partial_points: usize,
    full_points: usize,
) -> Result<Vec<ManifestRecord>> {
    let manifest = manifest.as_ref();
    let out_dir = out_dir.as_ref();
    if partial_points == 0 || full_points == 0 {
        return Err(Error::Config("export point counts must be positive".into()));
    }
    let base = manifest.parent().unwrap_or(Path::new("."));
    let records = read_manifest(manifest)?;
    fs::create_dir_all(out_dir.join(PAIRS_DIR))?;
    let exported = records
        .par_iter()
        .map(|r| {
            let mut out = r.clone();
            for (path, count) in [
                (&mut out.partial_path, partial_points),
                (&mut out.full_path, full_points),
            ] {
                let cloud = read_cloud_ply(base.join(&*path))?;
                let name = Path::new(path.as_str())
                    .file_name()
                    .ok_or_else(|| Error::InvalidInput(format!("bad manifest path {path:?}")))?
                    .to_string_lossy()
                    .into_owned();
                *path = format!("{PAIRS_DIR}/{name}");
                write_cloud_ply(out_dir.join(&*path), &farthest_point_sample(&cloud, count))?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(out_dir.join(MANIFEST_FILE), &exported)?;
    Ok(exported)
}
