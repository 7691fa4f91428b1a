use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{ComplexVolume, VoxelGridSpec};
use crate::geometry::Point3;
use crate::radar::{SignalSet, SPEED_OF_LIGHT};

/// Voxels processed together so the sample loop vectorizes across them.
const LANES: usize = 8;
/// Voxels per parallel task.
const CHUNK: usize = 64 * LANES;

/// Direct evaluation of the double sum, one `sin_cos` per term.
pub fn backproject_reference(signals: &SignalSet, grid: &VoxelGridSpec) -> ComplexVolume {
    let waveform = signals.waveform();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|l| {
            let v = grid.center_of(l);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, p) in signals.array().positions().iter().enumerate() {
                let d = (p - v).norm();
                for (t, h) in signals.row(k).iter().enumerate() {
                    let phase = 2.0 * PI * 2.0 * d / waveform.wavelength(t);
                    let (s, c) = phase.sin_cos();
                    acc += h * Complex64::new(c, s);
                }
            }
            acc
        })
        .collect();
    ComplexVolume::new(*grid, values).expect("finite signals give a finite image")
}

/// Blocked, parallel backprojection.
///
/// Per sensor the sample sum is a polynomial in the per-sample phase rotation
/// and is evaluated by Horner's rule, so only two `sin_cos` calls are needed
/// per voxel and sensor. The summation order per voxel is fixed, making the
/// result independent of the thread count.
pub fn backproject(signals: &SignalSet, grid: &VoxelGridSpec) -> ComplexVolume {
    let values = focus(signals, grid, |_, contributions| {
        contributions.iter().sum::<Complex64>()
    });
    ComplexVolume::new(*grid, values).expect("finite signals give a finite image")
}

/// Signals split into real and imaginary planes, samples reversed for Horner.
struct Prepared {
    re: Vec<f64>,
    im: Vec<f64>,
    samples: usize,
    /// Phase per meter of range at the first sample.
    base: f64,
    /// Phase increment per sample per meter of range.
    step: f64,
}

impl Prepared {
    fn new(signals: &SignalSet) -> Self {
        let t = signals.num_samples();
        let mut re = Vec::with_capacity(signals.samples().len());
        let mut im = Vec::with_capacity(signals.samples().len());
        for k in 0..signals.num_sensors() {
            for z in signals.row(k).iter().rev() {
                re.push(z.re);
                im.push(z.im);
            }
        }
        let w = signals.waveform();
        Self {
            re,
            im,
            samples: t,
            base: 4.0 * PI * w.start_frequency() / SPEED_OF_LIGHT,
            step: 4.0 * PI * w.frequency_step() / SPEED_OF_LIGHT,
        }
    }
}

/// Evaluates the per-sensor focused contributions
/// `c_k(v) = Σ_t h_k(t)·exp(+j·2π·2‖p_k − v‖/λ_t)` for every voxel and reduces
/// them with `reduce(v, [c_0, …, c_{N−1}])`.
pub(crate) fn focus<T, F>(signals: &SignalSet, grid: &VoxelGridSpec, reduce: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Point3, &[Complex64]) -> T + Sync,
{
    let prepared = Prepared::new(signals);
    let sensors = signals.array().positions();
    let n = sensors.len();
    let total = grid.len();
    let chunks: Vec<usize> = (0..total).step_by(CHUNK).collect();

    chunks
        .into_par_iter()
        .flat_map_iter(|start| {
            let end = (start + CHUNK).min(total);
            let mut out = Vec::with_capacity(end - start);
            let mut scratch = vec![Complex64::new(0.0, 0.0); LANES * n];
            for block in (start..end).step_by(LANES) {
                let width = LANES.min(end - block);
                let mut centers = [Point3::origin(); LANES];
                for (lane, c) in centers.iter_mut().enumerate().take(width) {
                    *c = grid.center_of(block + lane);
                }
                // Padding lanes repeat the last voxel and are discarded.
                for lane in width..LANES {
                    centers[lane] = centers[width - 1];
                }
                for (k, p) in sensors.iter().enumerate() {
                    let c = focus_lanes(&prepared, k, p, &centers);
                    for lane in 0..LANES {
                        scratch[lane * n + k] = c[lane];
                    }
                }
                for lane in 0..width {
                    out.push(reduce(&centers[lane], &scratch[lane * n..(lane + 1) * n]));
                }
            }
            out
        })
        .collect()
}

#[inline]
fn focus_lanes(
    prepared: &Prepared,
    sensor: usize,
    position: &Point3,
    centers: &[Point3; LANES],
) -> [Complex64; LANES] {
    let t = prepared.samples;
    let re = &prepared.re[sensor * t..(sensor + 1) * t];
    let im = &prepared.im[sensor * t..(sensor + 1) * t];

    let mut zr = [0.0; LANES];
    let mut zi = [0.0; LANES];
    let mut rot = [(0.0, 0.0); LANES];
    for lane in 0..LANES {
        let d = (position - centers[lane]).norm();
        let (s, c) = (prepared.step * d).sin_cos();
        zr[lane] = c;
        zi[lane] = s;
        rot[lane] = (prepared.base * d).sin_cos();
    }

    let mut ar = [re[0]; LANES];
    let mut ai = [im[0]; LANES];
    for s in 1..t {
        let (hr, hi) = (re[s], im[s]);
        for lane in 0..LANES {
            let r = ar[lane] * zr[lane] - ai[lane] * zi[lane] + hr;
            let i = ar[lane] * zi[lane] + ai[lane] * zr[lane] + hi;
            ar[lane] = r;
            ai[lane] = i;
        }
    }

    let mut out = [Complex64::new(0.0, 0.0); LANES];
    for lane in 0..LANES {
        let (s, c) = rot[lane];
        out[lane] = Complex64::new(ar[lane] * c - ai[lane] * s, ar[lane] * s + ai[lane] * c);
    }
    out
}
