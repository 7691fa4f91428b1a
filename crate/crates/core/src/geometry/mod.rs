//! Shared geometric types, mesh ingestion, surface sampling and neighbor queries.

mod cloud;
pub mod kdtree;
pub mod mesh;
pub mod pca;
pub mod primitives;

pub use cloud::{normalize_to_unit_sphere, OrientedPointCloud, RigidScale, NORMAL_TOLERANCE};
pub use kdtree::KdTree;
pub use mesh::{load_mesh, sample_surface, TriangleMesh};
pub use pca::{estimate_normals, principal_axes, PrincipalAxes};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// The `k` nearest point indices to `query`, nearest first, ties broken by lower index.
pub fn knn(cloud: &OrientedPointCloud, query: &Point3, k: usize) -> Result<Vec<usize>> {
    if k > cloud.len() {
        return Err(Error::KTooLarge { k, len: cloud.len() });
    }
    Ok(KdTree::new(cloud.points()).knn(query, k))
}
