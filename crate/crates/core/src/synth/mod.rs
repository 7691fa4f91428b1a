//! Physically consistent partial observations of full point clouds.
//!
//! A point survives when its normal is close to some sensor direction
//! (specular visibility), it lies on a surface facing the array (hidden-point
//! removal), and its normal passes the anisotropic material test. Survivors
//! are then displaced by Gaussian noise and randomly dropped.

mod hpr;
pub mod manifest;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hpr::{radar_facing_mask, FLIP_RADIUS_FACTOR};
pub use manifest::{ManifestRecord, Split};

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3, Vector3};
use crate::radar::SensorArray;

/// Most sensor positions used as hidden-point-removal viewpoints.
pub const MAX_VIEWPOINTS: usize = 16;

/// Minimum size of a full cloud accepted by [`synthesize_partial`].
pub const MIN_FULL_POINTS: usize = 100;

const COINCIDENT_DISTANCE: f64 = 1e-12;

/// How normals are compared against the radar-frame axes in the anisotropic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnisotropyMode {
    /// `acos(n·x̂) < τ_H` and `acos(n·ŷ) < τ_V`.
    Axis,
    /// Tilt away from the boresight plane: `|asin(n·x̂)| < τ_H` and `|asin(n·ŷ)| < τ_V`.
    #[default]
    Boresight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityParams {
    pub tau: f64,
    pub tau_h: f64,
    pub tau_v: f64,
    pub noise_sigma: f64,
    pub dropout_fraction: f64,
    pub anisotropy: AnisotropyMode,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            tau: 40f64.to_radians(),
            tau_h: PI,
            tau_v: PI,
            noise_sigma: 0.01,
            dropout_fraction: 0.0,
            anisotropy: AnisotropyMode::Boresight,
        }
    }
}

impl VisibilityParams {
    /// Every mask disabled and no perturbation.
    pub fn permissive() -> Self {
        Self {
            tau: PI,
            tau_h: PI,
            tau_v: PI,
            noise_sigma: 0.0,
            dropout_fraction: 0.0,
            anisotropy: AnisotropyMode::Boresight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, angle) in [("tau", self.tau), ("tau_h", self.tau_h), ("tau_v", self.tau_v)] {
            if !(angle > 0.0 && angle <= PI) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, π], got {angle}"
                )));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_fraction) {
            return Err(Error::InvalidInput(format!(
                "dropout_fraction must lie in [0, 1), got {}",
                self.dropout_fraction
            )));
        }
        Ok(())
    }
}

/// `θ < τ`, with `τ ≥ π` accepting every angle including exactly π.
#[inline]
fn within(theta: f64, tau: f64) -> bool {
    tau >= PI || theta < tau
}

#[inline]
fn angle(a: &Vector3, b: &Vector3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Smallest angle between each normal and the directions toward the sensors.
pub fn specular_angles(cloud: &OrientedPointCloud, array: &SensorArray) -> Result<Vec<f64>> {
    let normals = cloud.require_normals()?;
    cloud
        .points()
        .par_iter()
        .zip(normals)
        .enumerate()
        .map(|(i, (s, n))| {
            let mut best = f64::INFINITY;
            for (k, p) in array.positions().iter().enumerate() {
                let offset = p - s;
                let d = offset.norm();
                if d < COINCIDENT_DISTANCE {
                    return Err(Error::SensorCoincidesWithPoint {
                        sensor: k,
                        point: i,
                    });
                }
                best = best.min(angle(n, &(offset / d)));
            }
            Ok(best)
        })
        .collect()
}

/// Points whose normal lies within `tau` of the direction to at least one sensor.
pub fn specular_mask(cloud: &OrientedPointCloud, array: &SensorArray, tau: f64) -> Result<Vec<bool>> {
    Ok(specular_angles(cloud, array)?
        .into_iter()
        .map(|theta| within(theta, tau))
        .collect())
}

/// Anisotropic material test against the fixed radar-frame axes.
pub fn anisotropic_mask(cloud: &OrientedPointCloud, tau_h: f64, tau_v: f64) -> Result<Vec<bool>> {
    anisotropic_mask_with(cloud, tau_h, tau_v, AnisotropyMode::Axis)
}

pub fn anisotropic_mask_with(
    cloud: &OrientedPointCloud,
    tau_h: f64,
    tau_v: f64,
    mode: AnisotropyMode,
) -> Result<Vec<bool>> {
    let normals = cloud.require_normals()?;
    Ok(normals
        .iter()
        .map(|n| {
            let (h, v) = match mode {
                AnisotropyMode::Axis => (angle(n, &Vector3::x()), angle(n, &Vector3::y())),
                AnisotropyMode::Boresight => (
                    n.x.clamp(-1.0, 1.0).asin().abs(),
                    n.y.clamp(-1.0, 1.0).asin().abs(),
                ),
            };
            within(h, tau_h) && within(v, tau_v)
        })
        .collect())
}

/// Evenly strided subset of at most [`MAX_VIEWPOINTS`] sensor positions.
pub fn viewpoints(array: &SensorArray) -> Vec<Point3> {
    let n = array.len();
    let m = n.min(MAX_VIEWPOINTS);
    (0..m).map(|i| array.positions()[i * n / m]).collect()
}

/// Union of hidden-point-removal masks over several viewpoints.
pub fn radar_facing_union(cloud: &OrientedPointCloud, viewpoints: &[Point3]) -> Result<Vec<bool>> {
    let masks = viewpoints
        .par_iter()
        .map(|v| radar_facing_mask(cloud, v))
        .collect::<Result<Vec<_>>>()?;
    let mut union = vec![false; cloud.len()];
    for mask in masks {
        for (u, m) in union.iter_mut().zip(mask) {
            *u |= m;
        }
    }
    Ok(union)
}

/// Conjunction of the specular, radar-facing and anisotropic masks.
pub fn visibility_mask(
    full: &OrientedPointCloud,
    array: &SensorArray,
    params: &VisibilityParams,
) -> Result<Vec<bool>> {
    let specular = specular_mask(full, array, params.tau)?;
    let facing = radar_facing_union(full, &viewpoints(array))?;
    let material = anisotropic_mask_with(full, params.tau_h, params.tau_v, params.anisotropy)?;
    Ok(specular
        .iter()
        .zip(&facing)
        .zip(&material)
        .map(|((a, b), c)| *a && *b && *c)
        .collect())
}

/// Masks `full`, then perturbs and thins the survivors.
///
/// Returns the partial alongside the untouched full cloud. Noise and dropout
/// draw from one seeded stream in point order.
pub fn synthesize_partial(
    full: &OrientedPointCloud,
    array: &SensorArray,
    params: &VisibilityParams,
    seed: u64,
) -> Result<(OrientedPointCloud, OrientedPointCloud)> {
    params.validate()?;
    full.require_normals()?;
    if full.len() < MIN_FULL_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FULL_POINTS,
            got: full.len(),
        });
    }
    let mask = visibility_mask(full, array, params)?;
    let visible = full.masked(&mask);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (params.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, params.noise_sigma).expect("sigma is finite"));
    let mut keep = Vec::with_capacity(visible.len());
    let mut offsets = Vec::with_capacity(visible.len());
    for _ in 0..visible.len() {
        let offset = match &noise {
            Some(d) => Vector3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng)),
            None => Vector3::zeros(),
        };
        offsets.push(offset);
        keep.push(params.dropout_fraction == 0.0 || rng.gen::<f64>() >= params.dropout_fraction);
    }
    let displaced = OrientedPointCloud::with_normals(
        visible
            .points()
            .iter()
            .zip(&offsets)
            .map(|(p, o)| p + o)
            .collect(),
        visible.normals().expect("normals checked above").to_vec(),
    )?;
    let partial = displaced.masked(&keep);
    if partial.is_empty() {
        return Err(Error::EmptyPartial);
    }
    Ok((partial, full.clone()))
}
