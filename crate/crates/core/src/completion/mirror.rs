//! Deterministic mirror-symmetry completer.
//!
//! The partial is reflected across a plane perpendicular to its third
//! principal axis, merged with itself, deduplicated and resampled to a fixed
//! size. A partial that is already symmetric about the plane through its
//! centroid is mirrored there. Otherwise the plane sits at the partial's
//! extent on the side its normals face away from, which is where a surface
//! seen from one side is open.

use super::resample::{deduplicate, farthest_point_sample};
use super::{Completer, CompletionRequest, OUTPUT_POINTS};
use crate::error::{Error, Result};
use crate::geometry::{principal_axes, KdTree, OrientedPointCloud, Point3, Vector3};

pub const MIN_MIRROR_POINTS: usize = 10;

/// Points closer than this after merging are duplicates.
pub const DEDUP_TOLERANCE: f64 = 1e-3;

/// Mean reflected-to-original distance, relative to the RMS radius, below
/// which a partial counts as already symmetric.
const SYMMETRY_TOLERANCE: f64 = 0.02;

/// Mean normal component along the axis below which normals do not decide the side.
const NORMAL_BIAS: f64 = 0.1;

/// Fraction of points at each end of the axis compared by the spread fallback.
const END_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorCompleter {
    pub output_points: usize,
}

impl Default for MirrorCompleter {
    fn default() -> Self {
        Self {
            output_points: OUTPUT_POINTS,
        }
    }
}

impl Completer for MirrorCompleter {
    fn tag(&self) -> &str {
        "mirror"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<OrientedPointCloud> {
        self.run(&request.partial)
    }
}

/// Mirror completion with the default output size.
pub fn mirror_baseline_complete(partial: &OrientedPointCloud) -> Result<OrientedPointCloud> {
    MirrorCompleter::default().run(partial)
}

impl MirrorCompleter {
    pub fn run(&self, partial: &OrientedPointCloud) -> Result<OrientedPointCloud> {
        if partial.len() < MIN_MIRROR_POINTS {
            return Err(Error::DegenerateCloud(format!(
                "mirror completion needs at least {MIN_MIRROR_POINTS} points, got {}",
                partial.len()
            )));
        }
        let sorted = partial.sorted_lexicographic();
        let pca = principal_axes(sorted.points());
        if !(pca.eigenvalues[0] > 0.0) {
            return Err(Error::DegenerateCloud("all points coincide".into()));
        }
        let axis = pca.axes[2];
        let offset = mirror_offset(&sorted, &pca.centroid, &axis);
        let origin = pca.centroid + axis * offset;
        let mirrored = reflect(&sorted, &origin, &axis);
        let merged = deduplicate(&sorted.merged(&mirrored), DEDUP_TOLERANCE);
        Ok(farthest_point_sample(&merged, self.output_points))
    }
}

/// Reflection across the plane through `origin` with unit normal `axis`.
fn reflect(cloud: &OrientedPointCloud, origin: &Point3, axis: &Vector3) -> OrientedPointCloud {
    cloud.map(
        |p| p - axis * (2.0 * (p - origin).dot(axis)),
        |n| n - axis * (2.0 * n.dot(axis)),
    )
}

/// Signed offset of the mirror plane from the centroid along `axis`.
fn mirror_offset(cloud: &OrientedPointCloud, centroid: &Point3, axis: &Vector3) -> f64 {
    let rms = (cloud
        .points()
        .iter()
        .map(|p| (p - centroid).norm_squared())
        .sum::<f64>()
        / cloud.len() as f64)
        .sqrt();
    let about_centroid = reflect(cloud, centroid, axis);
    let tree = KdTree::new(cloud.points());
    let asymmetry = about_centroid
        .points()
        .iter()
        .map(|p| tree.nearest(p).expect("non-empty").1.sqrt())
        .sum::<f64>()
        / cloud.len() as f64;
    if asymmetry <= SYMMETRY_TOLERANCE * rms {
        return 0.0;
    }

    let heights: Vec<f64> = cloud.points().iter().map(|p| (p - centroid).dot(axis)).collect();
    let lo = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let facing = cloud.normals().map(|normals| {
        normals.iter().map(|n| n.dot(axis)).sum::<f64>() / normals.len() as f64
    });
    match facing {
        Some(f) if f > NORMAL_BIAS => lo,
        Some(f) if f < -NORMAL_BIAS => hi,
        _ => {
            if end_spread(cloud, centroid, axis, &heights, false)
                >= end_spread(cloud, centroid, axis, &heights, true)
            {
                lo
            } else {
                hi
            }
        }
    }
}

/// RMS distance from the axis of the points in the lowest (or highest) slice.
fn end_spread(
    cloud: &OrientedPointCloud,
    centroid: &Point3,
    axis: &Vector3,
    heights: &[f64],
    top: bool,
) -> f64 {
    let mut order: Vec<usize> = (0..heights.len()).collect();
    order.sort_by(|&a, &b| heights[a].total_cmp(&heights[b]).then(a.cmp(&b)));
    if top {
        order.reverse();
    }
    let count = ((END_FRACTION * heights.len() as f64).ceil() as usize).max(1);
    let sum: f64 = order[..count]
        .iter()
        .map(|&i| {
            let d = cloud.points()[i] - centroid;
            (d - axis * d.dot(axis)).norm_squared()
        })
        .sum();
    (sum / count as f64).sqrt()
}
