//! Hidden-point removal by spherical flipping.
//!
//! Points are expressed relative to the viewpoint and reflected through a
//! sphere of radius `R` (`p ↦ p + 2(R − ‖p‖)·p/‖p‖`). A point is visible when
//! its image is a vertex of the convex hull of all images plus the viewpoint.

use qhull::Qh;

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3};

/// Flip radius as a multiple of the cloud diameter.
pub const FLIP_RADIUS_FACTOR: f64 = 100.0;

/// Visibility of each point of `cloud` from `viewpoint`.
///
/// The cloud diameter is taken as its bounding-box diagonal. The flip radius
/// is never allowed below twice the farthest point distance, which the flip
/// requires to be a valid inversion.
pub fn radar_facing_mask(cloud: &OrientedPointCloud, viewpoint: &Point3) -> Result<Vec<bool>> {
    if cloud.len() < 4 {
        return Err(Error::DegenerateCloud(format!(
            "hidden-point removal needs at least 4 points, got {}",
            cloud.len()
        )));
    }
    let (lo, hi) = cloud.bounds().expect("cloud is non-empty");
    let diameter = (hi - lo).norm();
    if diameter <= 0.0 {
        return Err(Error::DegenerateCloud("all points coincide".into()));
    }
    let relative: Vec<_> = cloud.points().iter().map(|p| p - viewpoint).collect();
    let farthest = relative.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let radius = (FLIP_RADIUS_FACTOR * diameter).max(2.0 * farthest);

    let mut coords = Vec::with_capacity(3 * (relative.len() + 1));
    for r in &relative {
        let norm = r.norm();
        // A point at the viewpoint is trivially visible; keep it at the origin.
        let flipped = if norm > 0.0 {
            r * ((2.0 * radius - norm) / norm)
        } else {
            *r
        };
        coords.extend_from_slice(&[flipped.x, flipped.y, flipped.z]);
    }
    coords.extend_from_slice(&[0.0, 0.0, 0.0]);

    let qh = Qh::builder()
        .compute(true)
        .build_managed(3, coords)
        .map_err(|e| Error::DegenerateCloud(format!("convex hull failed: {e:?}")))?;
    let mut mask = vec![false; cloud.len()];
    for v in qh.vertices() {
        if let Some(i) = v.index(&qh) {
            if i < mask.len() {
                mask[i] = true;
            }
        }
    }
    Ok(mask)
}
