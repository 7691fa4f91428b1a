//! Candidate surface proposal.
//!
//! A normal field is estimated from the per-sensor focused contributions,
//! integrated along axis-ordered lattice paths into a scalar potential, and
//! sliced at several iso-values into candidate partial surfaces.

mod export;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use export::{read_candidates, write_candidates, CandidateRecord};

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3, Vector3};
use crate::imaging::{self, nearest_rank_percentile, VoxelGridSpec};
use crate::radar::SignalSet;

/// Voxels below this percentile of `|S|` carry no direction.
pub const CONFIDENCE_PERCENTILE: f64 = 90.0;
/// Default number of iso-values.
pub const DEFAULT_NUM_CANDIDATES: usize = 16;
/// Iso-values span these percentiles of the potential over confident voxels.
pub const ISO_PERCENTILES: (f64, f64) = (10.0, 90.0);

/// Per-voxel unit directions (absent below the confidence gate) and `|S|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalField {
    grid: VoxelGridSpec,
    directions: Vec<Option<Vector3>>,
    confidence: Vec<f64>,
}

impl NormalField {
    pub fn new(
        grid: VoxelGridSpec,
        directions: Vec<Option<Vector3>>,
        confidence: Vec<f64>,
    ) -> Result<Self> {
        if directions.len() != grid.len() || confidence.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "normal field has {} directions and {} confidences for {} voxels",
                directions.len(),
                confidence.len(),
                grid.len()
            )));
        }
        if directions
            .iter()
            .flatten()
            .any(|d| !((d.norm() - 1.0).abs() <= 1e-6))
        {
            return Err(Error::InvalidInput("normal field direction is not unit length".into()));
        }
        if confidence.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInput("confidence must be finite and ≥ 0".into()));
        }
        Ok(Self {
            grid,
            directions,
            confidence,
        })
    }

    pub fn grid(&self) -> &VoxelGridSpec {
        &self.grid
    }

    pub fn directions(&self) -> &[Option<Vector3>] {
        &self.directions
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn is_confident(&self, linear: usize) -> bool {
        self.directions[linear].is_some()
    }

    pub fn num_confident(&self) -> usize {
        self.directions.iter().filter(|d| d.is_some()).count()
    }

    /// Directions as plain vectors, zero where absent.
    pub fn vectors(&self) -> Vec<Vector3> {
        self.directions
            .iter()
            .map(|d| d.unwrap_or_else(Vector3::zeros))
            .collect()
    }
}

/// Potential on the grid, zero at the reference voxel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: VoxelGridSpec,
    values: Vec<f64>,
    reference: [usize; 3],
}

impl ScalarField {
    pub fn new(grid: VoxelGridSpec, values: Vec<f64>, reference: [usize; 3]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if !grid.contains(reference) {
            return Err(Error::InvalidInput(format!(
                "reference voxel {reference:?} outside grid {:?}",
                grid.dims()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential is not finite".into()));
        }
        if values[grid.linear_index(reference)] != 0.0 {
            return Err(Error::InvalidInput("potential is not zero at the reference voxel".into()));
        }
        Ok(Self {
            grid,
            values,
            reference,
        })
    }

    pub fn grid(&self) -> &VoxelGridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reference(&self) -> [usize; 3] {
        self.reference
    }
}

/// Candidate partial surfaces and the iso-values that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    partials: Vec<OrientedPointCloud>,
    iso_values: Vec<f64>,
    delta: f64,
}

impl CandidateSet {
    pub fn new(partials: Vec<OrientedPointCloud>, iso_values: Vec<f64>, delta: f64) -> Result<Self> {
        if partials.len() != iso_values.len() {
            return Err(Error::InvalidInput(format!(
                "{} partials for {} iso-values",
                partials.len(),
                iso_values.len()
            )));
        }
        if iso_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("iso-values must be strictly increasing".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            partials,
            iso_values,
            delta,
        })
    }

    pub fn partials(&self) -> &[OrientedPointCloud] {
        &self.partials
    }

    pub fn iso_values(&self) -> &[f64] {
        &self.iso_values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }
}

/// Normal field from the focused per-sensor contributions `c_k(v)`.
///
/// The direction at `v` is the `|c_k|`-weighted mean of the unit vectors from
/// `v` toward each sensor; confidence is `|Σ_k c_k|`. Voxels below the
/// confidence percentile, or with zero confidence, get no direction.
pub fn estimate_normal_field(signals: &SignalSet, grid: &VoxelGridSpec) -> NormalField {
    estimate_normal_field_with(signals, grid, CONFIDENCE_PERCENTILE)
}

/// [`estimate_normal_field`] with a custom confidence percentile in (0, 100].
pub fn estimate_normal_field_with(
    signals: &SignalSet,
    grid: &VoxelGridSpec,
    percentile: f64,
) -> NormalField {
    let sensors = signals.array().positions();
    let per_voxel = imaging::focus(signals, grid, |v, contributions| {
        let mut total = Complex64::new(0.0, 0.0);
        let mut pull = Vector3::zeros();
        for (c, p) in contributions.iter().zip(sensors) {
            total += c;
            let toward = p - v;
            let d = toward.norm();
            if d > 0.0 {
                pull += toward * (c.norm() / d);
            }
        }
        (total.norm(), pull)
    });
    let confidence: Vec<f64> = per_voxel.iter().map(|(c, _)| *c).collect();
    let cut = nearest_rank_percentile(&confidence, percentile);
    let directions = per_voxel
        .iter()
        .map(|(c, pull)| {
            let n = pull.norm();
            (*c >= cut && *c > 0.0 && n > 0.0).then(|| pull / n)
        })
        .collect();
    NormalField {
        grid: *grid,
        directions,
        confidence,
    }
}

/// Top-center voxel `(nx/2, ny/2, nz − 1)`.
pub fn default_reference(grid: &VoxelGridSpec) -> [usize; 3] {
    let [nx, ny, nz] = grid.dims();
    [nx / 2, ny / 2, nz - 1]
}

/// Integrates the normal field from `v0`; absent directions contribute 0.
pub fn integrate_potential(field: &NormalField, v0: [usize; 3]) -> Result<ScalarField> {
    let values = integrate_vector_field(&field.grid, &field.vectors(), v0)?;
    ScalarField::new(field.grid, values, v0)
}

/// Path integral of an arbitrary vector field from `v0` to every voxel.
///
/// The path runs along x, then y, then z. Each lattice step from `v_{j−1}` to
/// `v_j` adds `F(v_j)·d_j`, where `d_j` is the step displacement (one voxel
/// spacing along the axis, signed by direction), so the potential is in meters
/// for unit fields.
pub fn integrate_vector_field(
    grid: &VoxelGridSpec,
    field: &[Vector3],
    v0: [usize; 3],
) -> Result<Vec<f64>> {
    if field.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} vectors for {} voxels",
            field.len(),
            grid.len()
        )));
    }
    if !grid.contains(v0) {
        return Err(Error::InvalidInput(format!(
            "reference voxel {v0:?} outside grid {:?}",
            grid.dims()
        )));
    }
    let [nx, ny, nz] = grid.dims();
    let h = grid.spacing();
    let at = |i, j, k| grid.linear_index([i, j, k]);
    let component = |l: usize, axis: usize| field[l][axis];

    // Along x on the reference row.
    let x_leg = line_integral(nx, v0[0], h, |i| component(at(i, v0[1], v0[2]), 0));
    // Along y in the reference z-plane, starting from each x.
    let mut xy_leg = vec![0.0; nx * ny];
    for i in 0..nx {
        let line = line_integral(ny, v0[1], h, |j| component(at(i, j, v0[2]), 1));
        for j in 0..ny {
            xy_leg[i + nx * j] = x_leg[i] + line[j];
        }
    }
    let mut values = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let line = line_integral(nz, v0[2], h, |k| component(at(i, j, k), 2));
            for k in 0..nz {
                values[at(i, j, k)] = xy_leg[i + nx * j] + line[k];
            }
        }
    }
    Ok(values)
}

/// Cumulative sums of `h·g(m)` over the destinations of unit steps leaving `start`.
fn line_integral(len: usize, start: usize, h: f64, g: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for m in start + 1..len {
        out[m] = out[m - 1] + h * g(m);
    }
    for m in (0..start).rev() {
        out[m] = out[m + 1] - h * g(m);
    }
    out
}

/// Slices the potential at evenly spaced iso-values.
///
/// Iso-values run from the 10th to the 90th percentile of the potential over
/// confident voxels (a single candidate sits at their midpoint). Candidate `i`
/// holds the confident voxel centers with `|f − I(i)| < delta`, carrying the
/// field directions as normals. Empty candidates and repeated iso-values are
/// dropped.
pub fn sample_isosurfaces(
    scalar: &ScalarField,
    field: &NormalField,
    num_candidates: usize,
    delta: f64,
) -> Result<CandidateSet> {
    if num_candidates == 0 {
        return Err(Error::InvalidInput("need at least one candidate".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if scalar.grid != field.grid {
        return Err(Error::InvalidInput("scalar and normal fields use different grids".into()));
    }
    let confident: Vec<usize> = (0..field.grid.len())
        .filter(|&l| field.is_confident(l))
        .collect();
    if confident.is_empty() {
        return Err(Error::NoConfidentVoxels);
    }
    let f: Vec<f64> = confident.iter().map(|&l| scalar.values[l]).collect();
    let lo = nearest_rank_percentile(&f, ISO_PERCENTILES.0);
    let hi = nearest_rank_percentile(&f, ISO_PERCENTILES.1);
    let mut iso: Vec<f64> = if num_candidates == 1 {
        vec![lo + (hi - lo) / 2.0]
    } else {
        (0..num_candidates)
            .map(|i| lo + (hi - lo) * i as f64 / (num_candidates - 1) as f64)
            .collect()
    };
    iso.dedup();

    let mut partials = Vec::new();
    let mut kept = Vec::new();
    for level in iso {
        let members: Vec<usize> = confident
            .iter()
            .copied()
            .filter(|&l| (scalar.values[l] - level).abs() < delta)
            .collect();
        if members.is_empty() {
            continue;
        }
        let points: Vec<Point3> = members.iter().map(|&l| field.grid.center_of(l)).collect();
        let normals: Vec<Vector3> = members
            .iter()
            .map(|&l| field.directions[l].expect("member voxels are confident"))
            .collect();
        partials.push(OrientedPointCloud::with_normals(points, normals)?);
        kept.push(level);
    }
    CandidateSet::new(partials, kept, delta)
}

#[cfg(test)]
mod tests;
