//! Backprojection imaging on a regular voxel grid.
//!
//! Each voxel `v` receives `S(v) = Σ_k Σ_t h_k(t) · exp(+j·2π·2‖p_k − v‖/λ_t)`.
//! [`backproject_reference`] evaluates every term with its own sine and cosine;
//! [`backproject`] is the production kernel and agrees with it to ~1e-12.

mod io;
mod kernel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use io::{read_volume, read_volume_from, write_volume, write_volume_to};
pub(crate) use kernel::focus;
pub use kernel::{backproject, backproject_reference};

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3, Vector3};

/// Default percentile for [`threshold_image`].
pub const DEFAULT_THRESHOLD_PERCENTILE: f64 = 97.0;

/// Regular isotropic grid; voxel `(i, j, k)` is centered at `origin + spacing·(i, j, k)`.
///
/// Linear indices run x fastest, then y, then z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec")]
pub struct VoxelGridSpec {
    origin: Point3,
    spacing: f64,
    dims: [usize; 3],
}

#[derive(Deserialize)]
struct GridSpec {
    origin: Point3,
    spacing: f64,
    dims: [usize; 3],
}

impl TryFrom<GridSpec> for VoxelGridSpec {
    type Error = Error;

    fn try_from(g: GridSpec) -> Result<Self> {
        VoxelGridSpec::new(g.origin, g.spacing, g.dims)
    }
}

impl Default for VoxelGridSpec {
    /// 64³ voxels at 4 mm, centered on the origin.
    fn default() -> Self {
        Self::centered(Point3::origin(), 0.004, [64, 64, 64]).expect("default grid is valid")
    }
}

impl VoxelGridSpec {
    pub fn new(origin: Point3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "voxel spacing must be positive, got {spacing}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("grid dims must be ≥ 1, got {dims:?}")));
        }
        if origin.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("grid origin is not finite".into()));
        }
        Ok(Self {
            origin,
            spacing,
            dims,
        })
    }

    /// Grid whose voxel centers are symmetric about `center`.
    pub fn centered(center: Point3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        let half = Vector3::new(
            (dims[0].max(1) - 1) as f64,
            (dims[1].max(1) - 1) as f64,
            (dims[2].max(1) - 1) as f64,
        ) * (spacing / 2.0);
        Self::new(center - half, spacing, dims)
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear_index(&self, [i, j, k]: [usize; 3]) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn voxel_index(&self, linear: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    pub fn contains(&self, [i, j, k]: [usize; 3]) -> bool {
        i < self.dims[0] && j < self.dims[1] && k < self.dims[2]
    }

    pub fn center(&self, [i, j, k]: [usize; 3]) -> Point3 {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn center_of(&self, linear: usize) -> Point3 {
        self.center(self.voxel_index(linear))
    }

    /// Nearest voxel to `p`, if `p` lies within half a voxel of the grid.
    pub fn nearest_voxel(&self, p: &Point3) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.spacing;
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = rel[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// True when `p` coincides with a voxel center to within `tol` meters.
    pub fn is_on_center(&self, p: &Point3, tol: f64) -> bool {
        self.nearest_voxel(p)
            .is_some_and(|v| (self.center(v) - p).norm() <= tol)
    }

    pub fn centers(&self) -> impl Iterator<Item = Point3> + '_ {
        (0..self.len()).map(|l| self.center_of(l))
    }

    pub fn translated(&self, offset: &Vector3) -> Self {
        Self {
            origin: self.origin + offset,
            ..*self
        }
    }
}

/// Complex image values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    grid: VoxelGridSpec,
    values: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn new(grid: VoxelGridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("volume value is not finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &VoxelGridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Linear index of the largest `|S|`, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (i, z) in self.values.iter().enumerate() {
            let m = z.norm_sqr();
            if m > best_value {
                best = i;
                best_value = m;
            }
        }
        best
    }
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the data at or below it.
///
/// `p = 0` yields the minimum. Panics on an empty slice.
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p.clamp(0.0, 100.0) / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// Voxel centers whose magnitude reaches the given percentile of all magnitudes.
pub fn threshold_image(volume: &ComplexVolume, percentile: f64) -> Result<OrientedPointCloud> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::InvalidInput(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    let magnitudes = volume.magnitudes();
    let cut = nearest_rank_percentile(&magnitudes, percentile);
    let points = magnitudes
        .iter()
        .enumerate()
        .filter(|(_, m)| **m >= cut)
        .map(|(i, _)| volume.grid.center_of(i))
        .collect();
    Ok(OrientedPointCloud::from_points(points))
}
