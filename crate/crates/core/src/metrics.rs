//! Reconstruction quality metrics and difficulty categories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_to_unit_sphere, KdTree, OrientedPointCloud};

/// Distance threshold for precision, recall and coverage, in unit-sphere units.
pub const DEFAULT_THRESHOLD: f64 = 0.08;

/// Distance from each point of `from` to its nearest neighbor in `to`.
pub fn nearest_distances(from: &OrientedPointCloud, to: &OrientedPointCloud) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::new(to.points());
    Ok(from
        .points()
        .iter()
        .map(|p| tree.nearest(p).expect("tree is non-empty").1.sqrt())
        .collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean nearest-neighbor distance from `a` to `b` plus from `b` to `a`.
pub fn chamfer_distance(a: &OrientedPointCloud, b: &OrientedPointCloud) -> Result<f64> {
    Ok(mean(&nearest_distances(a, b)?) + mean(&nearest_distances(b, a)?))
}

/// Fraction of `from` points with a `to` point within `threshold` (inclusive).
pub fn fraction_within(
    from: &OrientedPointCloud,
    to: &OrientedPointCloud,
    threshold: f64,
) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::new(to.points());
    let hits = from
        .points()
        .iter()
        .filter(|p| tree.any_within(p, threshold))
        .count();
    Ok(hits as f64 / from.len() as f64)
}

pub fn fscore(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// `(precision, recall, fscore)` of `pred` against `gt`.
pub fn precision_recall_fscore(
    pred: &OrientedPointCloud,
    gt: &OrientedPointCloud,
    threshold: f64,
) -> Result<(f64, f64, f64)> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let precision = fraction_within(pred, gt, threshold)?;
    let recall = fraction_within(gt, pred, threshold)?;
    Ok((precision, recall, fscore(precision, recall)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverageCategory {
    Moderate,
    Challenging,
    Extreme,
}

impl CoverageCategory {
    /// Above 36% is moderate, above 18% challenging; boundaries go to the harder class.
    pub fn from_percent(percent: f64) -> Self {
        if percent > 36.0 {
            Self::Moderate
        } else if percent > 18.0 {
            Self::Challenging
        } else {
            Self::Extreme
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeCategory {
    Large,
    Medium,
    Small,
}

/// Size class of an object's longest dimension in meters; 0.10 and 0.20 are medium.
pub fn size_category(longest_dimension: f64) -> Result<SizeCategory> {
    if !(longest_dimension > 0.0) {
        return Err(Error::NonPositiveDimension(longest_dimension));
    }
    Ok(if longest_dimension > 0.20 {
        SizeCategory::Large
    } else if longest_dimension >= 0.10 {
        SizeCategory::Medium
    } else {
        SizeCategory::Small
    })
}

/// Percentage of `gt` points whose nearest `partial` point lies within the
/// default threshold, and its category. Both clouds are expected in
/// unit-sphere coordinates.
pub fn coverage_percent(
    partial: &OrientedPointCloud,
    gt: &OrientedPointCloud,
) -> Result<(f64, CoverageCategory)> {
    let percent = 100.0 * fraction_within(gt, partial, DEFAULT_THRESHOLD)?;
    Ok((percent, CoverageCategory::from_percent(percent)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub object_id: String,
    /// Longest bounding-box dimension of the object in meters.
    pub longest_dimension: f64,
    pub threshold: f64,
}

impl EvalMeta {
    /// Metadata taken from the ground-truth cloud, default threshold.
    pub fn for_object(object_id: impl Into<String>, gt: &OrientedPointCloud) -> Self {
        Self {
            object_id: object_id.into(),
            longest_dimension: gt.longest_dimension(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub object_id: String,
    pub chamfer: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub coverage_percent: f64,
    pub coverage_category: CoverageCategory,
    pub size_category: SizeCategory,
}

/// Scores `final_cloud` against `gt` after mapping all clouds into the unit
/// sphere fitted to `gt`.
pub fn evaluate_run(
    final_cloud: &OrientedPointCloud,
    gt: &OrientedPointCloud,
    partial: &OrientedPointCloud,
    meta: &EvalMeta,
) -> Result<EvalReport> {
    if final_cloud.is_empty() || gt.is_empty() || partial.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (gt_unit, transform) = normalize_to_unit_sphere(gt)?;
    let final_unit = transform.invert(final_cloud);
    let partial_unit = transform.invert(partial);
    let chamfer = chamfer_distance(&final_unit, &gt_unit)?;
    let (precision, recall, fscore) =
        precision_recall_fscore(&final_unit, &gt_unit, meta.threshold)?;
    let (coverage_percent, coverage_category) = coverage_percent(&partial_unit, &gt_unit)?;
    Ok(EvalReport {
        object_id: meta.object_id.clone(),
        chamfer,
        precision,
        recall,
        fscore,
        coverage_percent,
        coverage_category,
        size_category: size_category(meta.longest_dimension)?,
    })
}
