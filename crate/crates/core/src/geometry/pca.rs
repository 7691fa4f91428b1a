//! Covariance eigen-analysis of point sets.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use super::{KdTree, OrientedPointCloud, Point3, Vector3};
use crate::error::{Error, Result};

/// Centroid, eigenvalues (descending, clamped at 0) and matching unit eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    pub centroid: Point3,
    pub eigenvalues: [f64; 3],
    pub axes: [Vector3; 3],
}

/// Population covariance (divided by `n`) of a non-empty point set.
pub fn covariance<'a>(points: impl IntoIterator<Item = &'a Point3>) -> (Point3, Matrix3<f64>) {
    let points: Vec<&Point3> = points.into_iter().collect();
    assert!(!points.is_empty(), "covariance of an empty set");
    let n = points.len() as f64;
    let centroid = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3>() / n);
    let mut c = Matrix3::zeros();
    for p in &points {
        let d = *p - centroid;
        c += d * d.transpose();
    }
    (centroid, c / n)
}

pub fn principal_axes<'a>(points: impl IntoIterator<Item = &'a Point3>) -> PrincipalAxes {
    let (centroid, c) = covariance(points);
    let eig = SymmetricEigen::new(c);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    PrincipalAxes {
        centroid,
        eigenvalues: order.map(|i| eig.eigenvalues[i].max(0.0)),
        axes: order.map(|i| eig.eigenvectors.column(i).into_owned()),
    }
}

/// Normals from the smallest principal axis of each point's `k`-neighborhood,
/// oriented away from the cloud centroid.
pub fn estimate_normals(cloud: &OrientedPointCloud, k: usize) -> Result<OrientedPointCloud> {
    if cloud.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    let k = k.clamp(3, cloud.len());
    let tree = KdTree::new(cloud.points());
    let centroid = cloud.centroid().expect("cloud is non-empty");
    let normals = cloud
        .points()
        .par_iter()
        .map(|p| {
            let neighbors = tree.knn(p, k);
            let axes = principal_axes(neighbors.iter().map(|&i| &cloud.points()[i]));
            let n = axes.axes[2];
            let n = if n.norm() > 0.0 { n.normalize() } else { Vector3::z() };
            if n.dot(&(p - centroid)) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    OrientedPointCloud::with_normals(cloud.points().to_vec(), normals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_are_sorted_and_orthonormal() {
        let pts: Vec<Point3> = (0..50)
            .flat_map(|i| {
                let t = i as f64 / 49.0 - 0.5;
                [Point3::new(4.0 * t, 0.1, 0.5 * t * t), Point3::new(4.0 * t, -0.1, 0.0)]
            })
            .collect();
        let a = principal_axes(&pts);
        assert!(a.eigenvalues[0] >= a.eigenvalues[1] && a.eigenvalues[1] >= a.eigenvalues[2]);
        assert!(a.axes[0].x.abs() > 0.99);
        for i in 0..3 {
            assert!((a.axes[i].norm() - 1.0).abs() < 1e-12);
            for j in i + 1..3 {
                assert!(a.axes[i].dot(&a.axes[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_normals_point_outward() {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Point3> = (0..500)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / 500.0;
                let r = (1.0 - z * z).sqrt();
                Point3::new(r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z)
            })
            .collect();
        let cloud = estimate_normals(&OrientedPointCloud::from_points(pts), 12).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals().unwrap()) {
            assert!(n.dot(&p.coords) > 0.95);
        }
    }
}
