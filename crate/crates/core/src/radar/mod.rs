//! FMCW baseband forward model for a scene of specular point scatterers.
//!
//! Each scatterer contributes
//! `a · w · exp(−j·2π·2‖p_k − s‖/λ_t)` to sensor `k`, sample `t`, where the
//! specular weight `w = exp(−(θ/σ)²)` depends on the angle θ between the
//! scatterer normal and the direction back to the sensor. There is no path
//! loss, multipath or occlusion; the focusing kernel in [`crate::imaging`] is
//! the exact adjoint of this phase model.

pub(crate) mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_signals, read_signals_from, write_signals, write_signals_to};

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3, Vector3};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default width of the Gaussian specular lobe, radians (about 20°).
pub const DEFAULT_SPECULAR_SIGMA: f64 = 0.35;

/// Scatterers whose specular weight falls below this are skipped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-15;

/// Linear frequency sweep sampled at `num_samples` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveformSpec")]
pub struct Waveform {
    start_frequency: f64,
    bandwidth: f64,
    num_samples: usize,
}

#[derive(Deserialize)]
struct WaveformSpec {
    start_frequency: f64,
    bandwidth: f64,
    num_samples: usize,
}

impl TryFrom<WaveformSpec> for Waveform {
    type Error = Error;

    fn try_from(s: WaveformSpec) -> Result<Self> {
        Waveform::new(s.start_frequency, s.bandwidth, s.num_samples)
    }
}

impl Default for Waveform {
    /// 77 GHz start, 4 GHz sweep, 256 samples.
    fn default() -> Self {
        Self {
            start_frequency: 77e9,
            bandwidth: 4e9,
            num_samples: 256,
        }
    }
}

impl Waveform {
    pub fn new(start_frequency: f64, bandwidth: f64, num_samples: usize) -> Result<Self> {
        if !(start_frequency > 0.0 && start_frequency.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "start frequency must be positive, got {start_frequency}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if num_samples < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples per sweep, got {num_samples}"
            )));
        }
        Ok(Self {
            start_frequency,
            bandwidth,
            num_samples,
        })
    }

    pub fn start_frequency(&self) -> f64 {
        self.start_frequency
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Frequency spacing between consecutive samples.
    pub fn frequency_step(&self) -> f64 {
        self.bandwidth / (self.num_samples - 1) as f64
    }

    pub fn frequency(&self, t: usize) -> f64 {
        self.start_frequency + self.frequency_step() * t as f64
    }

    pub fn wavelength(&self, t: usize) -> f64 {
        SPEED_OF_LIGHT / self.frequency(t)
    }

    /// Round-trip phase `2π·2d/λ_t` at the first sample and its per-sample increment.
    pub fn round_trip_phase(&self, distance: f64) -> (f64, f64) {
        let scale = 4.0 * PI * distance / SPEED_OF_LIGHT;
        (
            scale * self.start_frequency,
            scale * self.frequency_step(),
        )
    }
}

/// Monostatic sensor positions and the array boresight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    positions: Vec<Point3>,
    boresight: Vector3,
}

impl SensorArray {
    pub fn new(positions: Vec<Point3>, boresight: Vector3) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("sensor array is empty".into()));
        }
        if positions
            .iter()
            .any(|p| p.coords.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidInput("sensor position is not finite".into()));
        }
        if !((boresight.norm() - 1.0).abs() <= 1e-6) {
            return Err(Error::InvalidInput(format!(
                "boresight must be unit length, got |b| = {}",
                boresight.norm()
            )));
        }
        Ok(Self {
            positions,
            boresight,
        })
    }

    /// Regular `nx × ny` grid in the plane `z = center.z`, looking down (−z).
    pub fn planar_grid(center: Point3, extent_x: f64, extent_y: f64, nx: usize, ny: usize) -> Self {
        let coord = |i: usize, n: usize, extent: f64| {
            if n == 1 {
                0.0
            } else {
                -extent / 2.0 + extent * i as f64 / (n - 1) as f64
            }
        };
        let positions = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                center + Vector3::new(coord(i, nx, extent_x), coord(j, ny, extent_y), 0.0)
            })
            .collect();
        Self::new(positions, -Vector3::z()).expect("planar grid is valid")
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn boresight(&self) -> Vector3 {
        self.boresight
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translated(&self, offset: &Vector3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            boresight: self.boresight,
        }
    }
}

/// Complex baseband samples, one row of `T` samples per sensor (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    samples: Vec<Complex64>,
    array: SensorArray,
    waveform: Waveform,
}

impl SignalSet {
    pub fn new(samples: Vec<Complex64>, array: SensorArray, waveform: Waveform) -> Result<Self> {
        let expected = array.len() * waveform.num_samples();
        if samples.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{} samples for {} sensors × {} samples",
                samples.len(),
                array.len(),
                waveform.num_samples()
            )));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("signal sample is not finite".into()));
        }
        Ok(Self {
            samples,
            array,
            waveform,
        })
    }

    pub fn zeros(array: SensorArray, waveform: Waveform) -> Self {
        let n = array.len() * waveform.num_samples();
        Self {
            samples: vec![Complex64::new(0.0, 0.0); n],
            array,
            waveform,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn row(&self, sensor: usize) -> &[Complex64] {
        let t = self.waveform.num_samples();
        &self.samples[sensor * t..(sensor + 1) * t]
    }

    pub fn array(&self) -> &SensorArray {
        &self.array
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn num_sensors(&self) -> usize {
        self.array.len()
    }

    pub fn num_samples(&self) -> usize {
        self.waveform.num_samples()
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Elementwise map over samples, keeping array and waveform.
    pub fn map_samples(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            samples: self.samples.iter().copied().map(f).collect(),
            array: self.array.clone(),
            waveform: self.waveform,
        }
    }

    /// Elementwise sum with another set on the same array and waveform.
    pub fn add(&self, other: &SignalSet) -> Result<Self> {
        if self.array != other.array || self.waveform != other.waveform {
            return Err(Error::InvalidInput(
                "signal sets have different acquisition geometry".into(),
            ));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            array: self.array.clone(),
            waveform: self.waveform,
        })
    }
}

/// Specular weight `exp(−(θ/σ)²)` for normal `n` and unit direction `u` toward the sensor.
#[inline]
pub fn specular_weight(normal: &Vector3, toward_sensor: &Vector3, sigma: f64) -> f64 {
    let theta = normal.dot(toward_sensor).clamp(-1.0, 1.0).acos();
    (-(theta / sigma).powi(2)).exp()
}

/// Forward-simulates baseband samples for a scene of oriented scatterers.
pub fn simulate_signals(
    scene: &OrientedPointCloud,
    array: &SensorArray,
    waveform: &Waveform,
    specular_sigma: f64,
) -> Result<SignalSet> {
    if !(specular_sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "specular sigma must be positive, got {specular_sigma}"
        )));
    }
    if scene.is_empty() {
        return Ok(SignalSet::zeros(array.clone(), *waveform));
    }
    let normals = scene.require_normals()?;
    let t_len = waveform.num_samples();

    let rows: Vec<Vec<Complex64>> = array
        .positions()
        .par_iter()
        .map(|sensor| {
            let mut row = vec![Complex64::new(0.0, 0.0); t_len];
            for (i, (s, n)) in scene.points().iter().zip(normals).enumerate() {
                let offset = sensor - s;
                let distance = offset.norm();
                if distance == 0.0 {
                    continue;
                }
                let w = specular_weight(n, &(offset / distance), specular_sigma);
                let amplitude = scene.amplitude(i) * w;
                if amplitude < NEGLIGIBLE_WEIGHT {
                    continue;
                }
                let (phase0, step) = waveform.round_trip_phase(distance);
                let rotation = Complex64::from_polar(1.0, -step);
                let mut z = Complex64::from_polar(amplitude, -phase0);
                for h in row.iter_mut() {
                    *h += z;
                    z *= rotation;
                }
            }
            row
        })
        .collect();
    SignalSet::new(rows.concat(), array.clone(), *waveform)
}

/// Adds circularly symmetric complex Gaussian noise at the requested SNR.
///
/// The SNR is relative to the mean sample power of the input.
pub fn add_signal_noise(signals: &SignalSet, snr_db: f64, seed: u64) -> SignalSet {
    let noise_power = signals.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return signals.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = signals.clone();
    for z in out.samples.iter_mut() {
        *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
    out
}
