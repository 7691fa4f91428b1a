//! Choosing one completed reconstruction among the candidates.
//!
//! Inputs whose candidate partials look vertically stacked are ambiguous, and
//! the candidate with the flattest local geometry wins. Otherwise each
//! candidate is forward-simulated and compared against the measurement.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::CompletedCandidate;
use crate::error::{Error, Result};
use crate::geometry::{principal_axes, KdTree, OrientedPointCloud};
use crate::imaging::{nearest_rank_percentile, VoxelGridSpec};
use crate::radar::{simulate_signals, SignalSet, DEFAULT_SPECULAR_SIGMA};

pub const DEFAULT_UNCERTAINTY_THRESHOLD: f64 = 0.6;
pub const DEFAULT_ENTROPY_NEIGHBORS: usize = 30;
pub const DEFAULT_ENTROPY_PERCENTILE: f64 = 75.0;

/// Which side of the threshold counts as high uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagDirection {
    /// Flag when the column ratio is at most the threshold (vertical stacking).
    #[default]
    AtMost,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub uncertainty_threshold: f64,
    pub flag_direction: FlagDirection,
    pub entropy_neighbors: usize,
    pub entropy_percentile: f64,
    pub specular_sigma: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            uncertainty_threshold: DEFAULT_UNCERTAINTY_THRESHOLD,
            flag_direction: FlagDirection::AtMost,
            entropy_neighbors: DEFAULT_ENTROPY_NEIGHBORS,
            entropy_percentile: DEFAULT_ENTROPY_PERCENTILE,
            specular_sigma: DEFAULT_SPECULAR_SIGMA,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.uncertainty_threshold) {
            return Err(Error::Config(format!(
                "uncertainty threshold must lie in [0, 1], got {}",
                self.uncertainty_threshold
            )));
        }
        if self.entropy_neighbors < 3 {
            return Err(Error::Config("entropy neighborhoods need at least 3 points".into()));
        }
        if !(self.entropy_percentile > 0.0 && self.entropy_percentile <= 100.0) {
            return Err(Error::Config(format!(
                "entropy percentile must lie in (0, 100], got {}",
                self.entropy_percentile
            )));
        }
        if !(self.specular_sigma > 0.0) {
            return Err(Error::Config("specular sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn is_high_uncertainty(&self, ratio: f64) -> bool {
        match self.flag_direction {
            FlagDirection::AtMost => ratio <= self.uncertainty_threshold,
            FlagDirection::Above => ratio > self.uncertainty_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Entropy,
    Rendering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Position of the winner in the completed-candidate list.
    pub chosen_index: usize,
    /// Candidate-set index of the winner's source partial.
    pub chosen_source_index: usize,
    pub uncertainty_ratios: Vec<f64>,
    pub entropy_scores: Vec<f64>,
    /// Present only on the rendering branch.
    pub rendering_scores: Option<Vec<f64>>,
    pub branch: Branch,
}

/// Distinct occupied (x, y) voxel columns divided by the number of points.
pub fn uncertainty_ratio(partial: &OrientedPointCloud, grid: &VoxelGridSpec) -> Result<f64> {
    if partial.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let origin = grid.origin();
    let columns: HashSet<(i64, i64)> = partial
        .points()
        .iter()
        .map(|p| {
            let r = (p - origin) / grid.spacing();
            (r.x.round() as i64, r.y.round() as i64)
        })
        .collect();
    Ok(columns.len() as f64 / partial.len() as f64)
}

/// `percentile` of the per-point λ₃/λ₁ over `k`-nearest-neighbor covariances.
///
/// A point's neighborhood is its `k` nearest other points.
pub fn entropy_score(cloud: &OrientedPointCloud, k: usize, percentile: f64) -> Result<f64> {
    Ok(nearest_rank_percentile(&local_entropies(cloud, k)?, percentile))
}

/// Per-point λ₃/λ₁, 0 where the neighborhood collapses to a point.
pub fn local_entropies(cloud: &OrientedPointCloud, k: usize) -> Result<Vec<f64>> {
    if k == 0 || cloud.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k.max(1) + 1,
            got: cloud.len(),
        });
    }
    let points = cloud.points();
    let tree = KdTree::new(points);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut neighbors = tree.knn(p, k + 1);
            match neighbors.iter().position(|&j| j == i) {
                Some(pos) => {
                    neighbors.remove(pos);
                }
                None => {
                    neighbors.pop();
                }
            }
            let axes = principal_axes(neighbors.iter().map(|&j| &points[j]));
            let [l1, _, l3] = axes.eigenvalues;
            if l1 > 0.0 {
                l3 / l1
            } else {
                0.0
            }
        })
        .collect())
}

/// Index of the smallest score, ties to the lower index.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    (0..scores.len()).reduce(|best, i| if scores[i] < scores[best] { i } else { best })
}

/// Index of the largest score, ties to the lower index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    (0..scores.len()).reduce(|best, i| if scores[i] > scores[best] { i } else { best })
}

pub fn entropy_scores(
    candidates: &[CompletedCandidate],
    k: usize,
    percentile: f64,
) -> Result<Vec<f64>> {
    candidates
        .par_iter()
        .map(|c| entropy_score(&c.reconstruction, k, percentile))
        .collect()
}

pub fn select_by_entropy(candidates: &[CompletedCandidate]) -> Result<usize> {
    let scores = entropy_scores(candidates, DEFAULT_ENTROPY_NEIGHBORS, DEFAULT_ENTROPY_PERCENTILE)?;
    argmin(&scores).ok_or(Error::NoCandidates)
}

/// |⟨a, b⟩| / (‖a‖‖b‖), or 0 when either side is all zero.
pub fn normalized_correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if na > 0.0 && nb > 0.0 {
        inner.norm() / (na * nb)
    } else {
        0.0
    }
}

pub fn rendering_scores(
    candidates: &[CompletedCandidate],
    measured: &SignalSet,
    specular_sigma: f64,
) -> Result<Vec<f64>> {
    candidates
        .par_iter()
        .map(|c| {
            c.reconstruction.require_normals()?;
            let sim = simulate_signals(
                &c.reconstruction,
                measured.array(),
                measured.waveform(),
                specular_sigma,
            )?;
            Ok(normalized_correlation(sim.samples(), measured.samples()))
        })
        .collect()
}

pub fn select_by_rendering(
    candidates: &[CompletedCandidate],
    measured: &SignalSet,
    specular_sigma: f64,
) -> Result<usize> {
    let scores = rendering_scores(candidates, measured, specular_sigma)?;
    argmax(&scores).ok_or(Error::NoCandidates)
}

/// Picks the final reconstruction. `partials[i]` is the candidate partial
/// that `candidates[i]` was completed from.
pub fn select(
    candidates: &[CompletedCandidate],
    partials: &[OrientedPointCloud],
    grid: &VoxelGridSpec,
    measured: &SignalSet,
    config: &SelectionConfig,
) -> Result<(OrientedPointCloud, SelectionReport)> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if partials.len() != candidates.len() {
        return Err(Error::InvalidInput(format!(
            "{} partials for {} candidates",
            partials.len(),
            candidates.len()
        )));
    }
    config.validate()?;
    let uncertainty_ratios = partials
        .iter()
        .map(|p| uncertainty_ratio(p, grid))
        .collect::<Result<Vec<_>>>()?;
    let entropy_scores =
        entropy_scores(candidates, config.entropy_neighbors, config.entropy_percentile)?;
    let flagged = uncertainty_ratios.iter().any(|&r| config.is_high_uncertainty(r));
    let (branch, chosen_index, rendering_scores) = if flagged {
        (Branch::Entropy, argmin(&entropy_scores).expect("non-empty"), None)
    } else {
        let scores = rendering_scores(candidates, measured, config.specular_sigma)?;
        (Branch::Rendering, argmax(&scores).expect("non-empty"), Some(scores))
    };
    let report = SelectionReport {
        chosen_index,
        chosen_source_index: candidates[chosen_index].source_index,
        uncertainty_ratios,
        entropy_scores,
        rendering_scores,
        branch,
    };
    Ok((candidates[chosen_index].reconstruction.clone(), report))
}

#[cfg(test)]
mod tests {
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::fixtures::fibonacci_sphere;
    use crate::geometry::Point3;
    use crate::radar::{SensorArray, Waveform};

    fn grid() -> VoxelGridSpec {
        VoxelGridSpec::centered(Point3::origin(), 0.01, [32, 32, 32]).unwrap()
    }

    fn candidate(cloud: OrientedPointCloud) -> CompletedCandidate {
        CompletedCandidate {
            reconstruction: cloud,
            source_index: 0,
            completer_tag: "test".into(),
        }
    }

    fn plane(n: usize, seed: u64) -> OrientedPointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OrientedPointCloud::from_points(
            (0..n)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0))
                .collect(),
        )
    }

    fn gaussian(n: usize, seed: u64) -> OrientedPointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OrientedPointCloud::from_points(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    )
                })
                .collect(),
        )
    }

    fn column_cloud(grid: &VoxelGridSpec, columns: &[[usize; 2]], heights: usize) -> Vec<Point3> {
        columns
            .iter()
            .flat_map(|&[i, j]| (0..heights).map(move |k| grid.center([i, j, k])))
            .collect()
    }

    #[test]
    fn flat_slabs_have_unit_ratio() {
        let g = grid();
        let cols: Vec<[usize; 2]> = (0..10).flat_map(|i| (0..10).map(move |j| [i, j])).collect();
        let slab = OrientedPointCloud::from_points(column_cloud(&g, &cols, 1));
        let r = uncertainty_ratio(&slab, &g).unwrap();
        assert_eq!(r, 1.0);
        assert!(!SelectionConfig::default().is_high_uncertainty(r));
    }

    #[test]
    fn stacked_columns_are_flagged() {
        let g = grid();
        let stack = OrientedPointCloud::from_points(column_cloud(&g, &[[3, 4]], 10));
        let r = uncertainty_ratio(&stack, &g).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
        assert!(SelectionConfig::default().is_high_uncertainty(r));
    }

    #[test]
    fn mixed_ratio_counts_columns() {
        let g = grid();
        let cols: Vec<[usize; 2]> = (0..50).map(|i| [i % 25, 1 + i / 25]).collect();
        let mut points = column_cloud(&g, &cols, 1);
        points.extend(column_cloud(&g, &[[30, 30]], 50));
        let r = uncertainty_ratio(&OrientedPointCloud::from_points(points), &g).unwrap();
        assert!((r - 51.0 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_is_order_invariant_and_z_duplicates_lower_it() {
        let g = grid();
        let cols: Vec<[usize; 2]> = (0..20).map(|i| [i, (i * 7) % 13]).collect();
        let points = column_cloud(&g, &cols, 2);
        let base = uncertainty_ratio(&OrientedPointCloud::from_points(points.clone()), &g).unwrap();
        let mut reversed = points.clone();
        reversed.reverse();
        assert_eq!(base, uncertainty_ratio(&OrientedPointCloud::from_points(reversed), &g).unwrap());
        let mut more = points.clone();
        more.extend(points.iter().map(|p| p + Vector3::new(0.0, 0.0, 0.05)));
        assert!(uncertainty_ratio(&OrientedPointCloud::from_points(more), &g).unwrap() <= base);
        assert!(matches!(
            uncertainty_ratio(&OrientedPointCloud::default(), &g),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn coplanar_and_coincident_clouds_score_zero() {
        assert_eq!(entropy_score(&plane(200, 1), 30, 75.0).unwrap(), 0.0);
        let same = OrientedPointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0); 40]);
        assert_eq!(entropy_score(&same, 30, 75.0).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_noise_scores_high() {
        let s = entropy_score(&gaussian(5000, 2), 30, 75.0).unwrap();
        assert!((0.5..=1.0).contains(&s), "score {s}");
    }

    #[test]
    fn entropy_needs_more_than_k_points() {
        assert!(matches!(
            entropy_score(&plane(30, 3), 30, 75.0),
            Err(Error::TooFewPoints { needed: 31, got: 30 })
        ));
        assert!(entropy_score(&plane(31, 3), 30, 75.0).is_ok());
    }

    #[test]
    fn entropy_is_rigid_and_scale_invariant() {
        let cloud = gaussian(400, 5).map(|p| Point3::new(p.x, 0.5 * p.y, 0.2 * p.z), |n| *n);
        let base = entropy_score(&cloud, 30, 75.0).unwrap();
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let moved = cloud.map(|p| r * p * 3.5 + Vector3::new(4.0, -2.0, 7.0), |n| *n);
        assert!((entropy_score(&moved, 30, 75.0).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn entropy_prefers_the_planar_candidate() {
        let c = vec![candidate(gaussian(300, 7)), candidate(plane(300, 8))];
        assert_eq!(select_by_entropy(&c).unwrap(), 1);
        assert_eq!(select_by_entropy(&c[..1]).unwrap(), 0);
        let twins = vec![candidate(plane(300, 9)), candidate(plane(300, 9))];
        assert_eq!(select_by_entropy(&twins).unwrap(), 0);
        assert!(matches!(select_by_entropy(&[]), Err(Error::NoCandidates)));
    }

    #[test]
    fn argmin_survives_monotone_transforms() {
        let scores: [f64; 5] = [0.4, 0.1, 0.7, 0.1, 0.3];
        let squashed: Vec<f64> = scores.iter().map(|s| (5.0 * s).exp() + 2.0).collect();
        assert_eq!(argmin(&scores), Some(1));
        assert_eq!(argmin(&squashed), Some(1));
        assert_eq!(argmax(&scores), Some(2));
        assert_eq!(argmin(&[]), None);
    }

    fn scene_signals(scene: &OrientedPointCloud) -> SignalSet {
        let array = SensorArray::planar_grid(Point3::new(0.0, 0.0, 0.5), 0.4, 0.4, 8, 8);
        let waveform = Waveform::new(77e9, 4e9, 32).unwrap();
        simulate_signals(scene, &array, &waveform, DEFAULT_SPECULAR_SIGMA).unwrap()
    }

    #[test]
    fn rendering_picks_the_true_scene_among_shifted_decoys() {
        let truth = fibonacci_sphere(300, Point3::new(0.0, 0.0, 0.0), 0.05);
        let measured = scene_signals(&truth);
        let shift = 5.0 * 0.004;
        let decoys: Vec<CompletedCandidate> = [
            Vector3::new(shift, 0.0, 0.0),
            Vector3::new(0.0, -shift, 0.0),
            Vector3::new(0.0, 0.0, shift),
        ]
        .iter()
        .map(|d| candidate(truth.map(|p| p + d, |n| *n)))
        .collect();
        let mut candidates = decoys.clone();
        candidates.insert(2, candidate(truth.clone()));
        assert_eq!(select_by_rendering(&candidates, &measured, DEFAULT_SPECULAR_SIGMA).unwrap(), 2);
        assert_eq!(
            select_by_rendering(&candidates[..1], &measured, DEFAULT_SPECULAR_SIGMA).unwrap(),
            0
        );
        let silent = measured.map_samples(|_| Complex64::new(0.0, 0.0));
        let scores = rendering_scores(&candidates, &silent, DEFAULT_SPECULAR_SIGMA).unwrap();
        assert!(scores.iter().all(|&s| s == 0.0));
        assert_eq!(select_by_rendering(&candidates, &silent, DEFAULT_SPECULAR_SIGMA).unwrap(), 0);
    }

    #[test]
    fn rendering_requires_normals() {
        let bare = candidate(plane(50, 1));
        let measured = scene_signals(&fibonacci_sphere(50, Point3::origin(), 0.05));
        assert!(matches!(
            select_by_rendering(&[bare], &measured, DEFAULT_SPECULAR_SIGMA),
            Err(Error::MissingNormals)
        ));
    }

    #[test]
    fn dispatch_follows_the_uncertainty_flag() {
        let g = grid();
        let cols: Vec<[usize; 2]> = (0..8).flat_map(|i| (0..8).map(move |j| [i, j])).collect();
        let slab = OrientedPointCloud::from_points(column_cloud(&g, &cols, 1));
        let stack = OrientedPointCloud::from_points(column_cloud(&g, &[[5, 5]], 10));
        let sphere = fibonacci_sphere(200, Point3::origin(), 0.05);
        let candidates = vec![candidate(sphere.clone()), candidate(sphere.clone())];
        let measured = scene_signals(&sphere);
        let config = SelectionConfig::default();

        let (_, report) =
            select(&candidates, &[slab.clone(), slab.clone()], &g, &measured, &config).unwrap();
        assert_eq!(report.branch, Branch::Rendering);
        assert!(report.rendering_scores.is_some());

        let (final_cloud, report) =
            select(&candidates, &[slab, stack], &g, &measured, &config).unwrap();
        assert_eq!(report.branch, Branch::Entropy);
        assert_eq!(report.uncertainty_ratios[1], 0.1);
        assert_eq!(report.chosen_index, 0);
        assert_eq!(final_cloud, sphere);
    }

    #[test]
    fn flag_direction_is_configurable() {
        let above = SelectionConfig {
            flag_direction: FlagDirection::Above,
            ..SelectionConfig::default()
        };
        assert!(above.is_high_uncertainty(0.61));
        assert!(!above.is_high_uncertainty(0.6));
        assert!(SelectionConfig::default().is_high_uncertainty(0.6));
    }
}
