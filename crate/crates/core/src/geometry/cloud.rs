use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{Point3, Vector3};
use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// A point cloud with optional per-point unit normals and reflectivities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrientedPointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vector3>>,
    reflectivity: Option<Vec<f64>>,
}

impl OrientedPointCloud {
    /// Cloud without normals. Panics on non-finite coordinates.
    pub fn from_points(points: Vec<Point3>) -> Self {
        assert!(
            points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())),
            "point coordinates must be finite"
        );
        Self {
            points,
            normals: None,
            reflectivity: None,
        }
    }

    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vector3>) -> Result<Self> {
        let cloud = Self::from_points(points);
        cloud.set_normals(normals)
    }

    /// Attaches normals after normalizing each to unit length. Zero vectors are rejected.
    pub fn with_normalized_normals(points: Vec<Point3>, normals: Vec<Vector3>) -> Result<Self> {
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    Ok(n / len)
                } else {
                    Err(Error::InvalidInput("cannot normalize a zero normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_normals(points, normals)
    }

    fn set_normals(mut self, normals: Vec<Vector3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= NORMAL_TOLERANCE))
        {
            return Err(Error::InvalidInput(format!(
                "normal {i} is not unit length (|n| = {})",
                normals[i].norm()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_reflectivity(mut self, reflectivity: Vec<f64>) -> Result<Self> {
        if reflectivity.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} reflectivities for {} points",
                reflectivity.len(),
                self.points.len()
            )));
        }
        if reflectivity.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput(
                "reflectivity must be finite and non-negative".into(),
            ));
        }
        self.reflectivity = Some(reflectivity);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3]> {
        self.normals.as_deref()
    }

    pub fn reflectivity(&self) -> Option<&[f64]> {
        self.reflectivity.as_deref()
    }

    pub fn require_normals(&self) -> Result<&[Vector3]> {
        self.normals().ok_or(Error::MissingNormals)
    }

    /// Reflectivity of point `i`, defaulting to 1.
    pub fn amplitude(&self, i: usize) -> f64 {
        self.reflectivity.as_ref().map_or(1.0, |a| a[i])
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    /// Keeps the points where `mask` is true.
    pub fn masked(&self, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), self.len(), "mask length mismatch");
        let indices: Vec<usize> = (0..self.len()).filter(|&i| mask[i]).collect();
        self.subset(&indices)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            reflectivity: self
                .reflectivity
                .as_ref()
                .map(|a| indices.iter().map(|&i| a[i]).collect()),
        }
    }

    /// Appends `other`. Normals and reflectivity survive only when both sides carry them.
    pub fn merged(&self, other: &Self) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let reflectivity = match (&self.reflectivity, &other.reflectivity) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self {
            points,
            normals,
            reflectivity,
        }
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.len() as f64))
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Longest side of the axis-aligned bounding box.
    pub fn longest_dimension(&self) -> f64 {
        self.bounds()
            .map_or(0.0, |(lo, hi)| (hi - lo).iter().copied().fold(0.0, f64::max))
    }

    /// Applies `f` to every point and `g` to every normal.
    pub fn map(&self, f: impl Fn(&Point3) -> Point3, g: impl Fn(&Vector3) -> Vector3) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            normals: self.normals.as_ref().map(|n| n.iter().map(g).collect()),
            reflectivity: self.reflectivity.clone(),
        }
    }

    /// Permutes points (and attributes) into lexicographic coordinate order.
    pub fn sorted_lexicographic(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (p, q) = (&self.points[a], &self.points[b]);
            p.x.total_cmp(&q.x)
                .then(p.y.total_cmp(&q.y))
                .then(p.z.total_cmp(&q.z))
                .then(a.cmp(&b))
        });
        self.subset(&order)
    }
}

/// A similarity transform `x ↦ rotation · (scale · x) + translation`.
///
/// In this crate it always maps unit-sphere coordinates back to the original frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidScale {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3,
    pub scale: f64,
}

impl Default for RigidScale {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidScale {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3, scale: f64) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(orth <= 1e-6) {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthonormal (deviation {orth:e})"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * (p.coords * self.scale) + self.translation)
    }

    pub fn apply_normal(&self, n: &Vector3) -> Vector3 {
        self.rotation * n
    }

    pub fn invert_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation) / self.scale)
    }

    pub fn invert_normal(&self, n: &Vector3) -> Vector3 {
        self.rotation.transpose() * n
    }

    pub fn apply(&self, cloud: &OrientedPointCloud) -> OrientedPointCloud {
        cloud.map(|p| self.apply_point(p), |n| self.apply_normal(n))
    }

    pub fn invert(&self, cloud: &OrientedPointCloud) -> OrientedPointCloud {
        cloud.map(|p| self.invert_point(p), |n| self.invert_normal(n))
    }
}

/// Centers the cloud on its centroid and scales it so the farthest point lies on the unit sphere.
///
/// The returned transform maps the normalized cloud back onto the input.
pub fn normalize_to_unit_sphere(
    cloud: &OrientedPointCloud,
) -> Result<(OrientedPointCloud, RigidScale)> {
    let centroid = cloud.centroid().ok_or(Error::EmptyCloud)?;
    let radius = cloud
        .points()
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max);
    if !(radius > 1e-12 * (1.0 + centroid.coords.norm())) {
        return Err(Error::DegenerateCloud("all points coincide".into()));
    }
    let transform = RigidScale {
        rotation: Matrix3::identity(),
        translation: centroid.coords,
        scale: radius,
    };
    let normalized = cloud.map(
        |p| Point3::from((p - centroid) / radius),
        |n| *n,
    );
    Ok((normalized, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> OrientedPointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OrientedPointCloud::from_points(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-3.0..5.0),
                        rng.gen_range(-1.0..0.5),
                        rng.gen_range(10.0..12.0),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn symmetric_pair_normalizes_to_unit_scale() {
        let cloud = OrientedPointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ]);
        let (out, t) = normalize_to_unit_sphere(&cloud).unwrap();
        assert_eq!(out.points()[0], Point3::new(-1.0, 0.0, 0.0));
        assert_eq!(out.points()[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn normalization_round_trips() {
        let cloud = random_cloud(500, 3);
        let (out, t) = normalize_to_unit_sphere(&cloud).unwrap();
        let c = out.centroid().unwrap();
        assert!(c.coords.norm() < 1e-9);
        let max = out.points().iter().map(|p| p.coords.norm()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-9);
        let back = t.apply(&out);
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-7);
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let (once, _) = normalize_to_unit_sphere(&random_cloud(300, 9)).unwrap();
        let (twice, t) = normalize_to_unit_sphere(&once).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-7);
        assert!(t.translation.norm() < 1e-7);
        for (a, b) in once.points().iter().zip(twice.points()) {
            assert!((a - b).norm() < 1e-7);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let cloud = OrientedPointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0); 4]);
        assert!(matches!(
            normalize_to_unit_sphere(&cloud),
            Err(Error::DegenerateCloud(_))
        ));
    }

    #[test]
    fn normals_survive_normalization() {
        let cloud = OrientedPointCloud::with_normals(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 4.0)],
            vec![Vector3::z(), -Vector3::z()],
        )
        .unwrap();
        let (out, _) = normalize_to_unit_sphere(&cloud).unwrap();
        assert_eq!(out.normals(), cloud.normals());
    }

    #[test]
    fn rejects_non_unit_normals() {
        let err = OrientedPointCloud::with_normals(
            vec![Point3::origin()],
            vec![Vector3::new(0.0, 0.0, 1.1)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_negative_reflectivity() {
        let cloud = OrientedPointCloud::from_points(vec![Point3::origin()]);
        assert!(cloud.with_reflectivity(vec![-0.5]).is_err());
    }

    #[test]
    fn rigid_scale_rejects_non_orthonormal_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidScale::new(m, Vector3::zeros(), 1.0).is_err());
        assert!(RigidScale::new(Matrix3::identity(), Vector3::zeros(), 0.0).is_err());
    }

    #[test]
    fn rigid_scale_inverse_recovers_points() {
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let t = RigidScale::new(rot, Vector3::new(1.0, -2.0, 0.5), 3.5).unwrap();
        let cloud = random_cloud(50, 1);
        let back = t.invert(&t.apply(&cloud));
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
