//! Reproducible synthetic scenes for tests, benchmarks and the CLI.
//!
//! A fixture scene is one primitive object near the origin, sampled into an
//! oriented ground-truth cloud and observed by a planar array overhead.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{primitives, sample_surface, OrientedPointCloud, Point3, TriangleMesh, Vector3};
use crate::synth::{radar_facing_union, viewpoints};
use crate::radar::{
    add_signal_noise, simulate_signals, SensorArray, SignalSet, Waveform, DEFAULT_SPECULAR_SIGMA,
};

/// Near-uniform points on a sphere with exact outward normals.
pub fn fibonacci_sphere(n: usize, center: Point3, radius: f64) -> OrientedPointCloud {
    let golden = PI * (3.0 - 5f64.sqrt());
    let (points, normals) = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let u = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            (center + u * radius, u)
        })
        .unzip();
    OrientedPointCloud::with_normalized_normals(points, normals).expect("unit normals")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureShape {
    Sphere,
    Cube,
    Cylinder,
    LBracket,
}

impl FixtureShape {
    pub const ALL: [FixtureShape; 4] = [
        FixtureShape::Sphere,
        FixtureShape::Cube,
        FixtureShape::Cylinder,
        FixtureShape::LBracket,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureShape::Sphere => "sphere",
            FixtureShape::Cube => "cube",
            FixtureShape::Cylinder => "cylinder",
            FixtureShape::LBracket => "l-bracket",
        }
    }

    /// The object in its canonical pose: every shape shows the array a
    /// surface that is mirror-symmetric to its hidden side.
    pub fn mesh(self) -> TriangleMesh {
        centered(match self {
            FixtureShape::Sphere => primitives::uv_sphere(0.06, 24, 48),
            // Edge up, so two faces slope toward the array.
            FixtureShape::Cube => rotate_x(primitives::cuboid(0.1, 0.1, 0.1), FRAC_PI_4),
            // Axis along x, lying on its side.
            FixtureShape::Cylinder => primitives::cylinder(0.045, 0.14, 48),
            // Corner up, both outer faces toward the array.
            FixtureShape::LBracket => rotate_x(primitives::l_bracket(0.12, 0.03, 0.1), 1.25 * PI),
        })
    }
}

impl fmt::Display for FixtureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fixture shape {s:?}")))
    }
}

/// Moves the bounding-box center to the origin.
fn centered(mesh: TriangleMesh) -> TriangleMesh {
    let v = mesh.vertices();
    let lo = v.iter().fold(Vector3::repeat(f64::INFINITY), |a, p| a.inf(&p.coords));
    let hi = v.iter().fold(Vector3::repeat(f64::NEG_INFINITY), |a, p| a.sup(&p.coords));
    let shift = (lo + hi) / 2.0;
    mesh.transformed(|p| p - shift).expect("translation keeps the mesh valid")
}

fn rotate_x(mesh: TriangleMesh, angle: f64) -> TriangleMesh {
    let r = Rotation3::from_axis_angle(&Vector3::x_axis(), angle);
    mesh.transformed(|p| r * p).expect("rotation keeps the mesh valid")
}

/// Planar array description, boresight −z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub center: [f64; 3],
    pub extent: [f64; 2],
    pub count: [usize; 2],
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0, 0.25],
            extent: [0.4, 0.4],
            count: [16, 16],
        }
    }
}

impl ArrayConfig {
    pub fn build(&self) -> Result<SensorArray> {
        if self.count.contains(&0) || self.extent.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config(format!("invalid sensor array {self:?}")));
        }
        Ok(SensorArray::planar_grid(
            Point3::from(self.center),
            self.extent[0],
            self.extent[1],
            self.count[0],
            self.count[1],
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub array: ArrayConfig,
    pub waveform: Waveform,
    pub specular_sigma: f64,
    /// Scatterers sampled on the object surface.
    pub points: usize,
    /// Measurement SNR in dB; infinite leaves the signals noise-free.
    pub snr_db: f64,
    /// Drop scatterers hidden from every sensor before simulating.
    pub self_occlusion: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            waveform: Waveform::new(77e9, 4e9, 32).expect("valid waveform"),
            specular_sigma: DEFAULT_SPECULAR_SIGMA,
            points: 4000,
            snr_db: 30.0,
            self_occlusion: false,
        }
    }
}

/// Placement of a fixture object: a rotation about the vertical axis, then a shift.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub yaw: f64,
    pub offset: [f64; 3],
}

impl Pose {
    /// Random yaw and a horizontal shift of at most `max_shift` per axis.
    pub fn random(rng: &mut impl Rng, max_shift: f64) -> Self {
        Self {
            yaw: rng.gen_range(0.0..2.0 * PI),
            offset: [
                rng.gen_range(-max_shift..=max_shift),
                rng.gen_range(-max_shift..=max_shift),
                0.0,
            ],
        }
    }

    pub fn apply(&self, cloud: &OrientedPointCloud) -> OrientedPointCloud {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let t = Vector3::from(self.offset);
        cloud.map(|p| r * p + t, |n| r * n)
    }
}

#[derive(Debug, Clone)]
pub struct FixtureScene {
    pub object_id: String,
    pub shape: FixtureShape,
    pub pose: Pose,
    pub ground_truth: OrientedPointCloud,
    pub signals: SignalSet,
}

pub fn build_scene(
    object_id: impl Into<String>,
    shape: FixtureShape,
    pose: Pose,
    config: &SceneConfig,
    seed: u64,
) -> Result<FixtureScene> {
    let ground_truth = pose.apply(&sample_surface(&shape.mesh(), config.points, seed)?);
    Ok(FixtureScene {
        object_id: object_id.into(),
        shape,
        pose,
        signals: observe(&ground_truth, config, seed)?,
        ground_truth,
    })
}

/// Signals the configured array records from `ground_truth`, noise drawn from `seed`.
pub fn observe(ground_truth: &OrientedPointCloud, config: &SceneConfig, seed: u64) -> Result<SignalSet> {
    let array = config.array.build()?;
    let visible;
    let scene = if config.self_occlusion {
        visible = ground_truth.masked(&radar_facing_union(ground_truth, &viewpoints(&array))?);
        &visible
    } else {
        ground_truth
    };
    let signals = simulate_signals(scene, &array, &config.waveform, config.specular_sigma)?;
    Ok(if config.snr_db.is_finite() {
        add_signal_noise(&signals, config.snr_db, seed ^ 0x5eed)
    } else {
        signals
    })
}

/// The four canonical scenes, one per shape, unrotated and centered.
pub fn fixture_suite(config: &SceneConfig, seed: u64) -> Result<Vec<FixtureScene>> {
    FixtureShape::ALL
        .iter()
        .enumerate()
        .map(|(i, &shape)| build_scene(shape.name(), shape, Pose::default(), config, seed + i as u64))
        .collect()
}

/// `n` scenes cycling through the shapes with random poses.
pub fn randomized_scenes(n: usize, config: &SceneConfig, seed: u64) -> Result<Vec<FixtureScene>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let shape = FixtureShape::ALL[i % FixtureShape::ALL.len()];
            let pose = Pose::random(&mut rng, 0.01);
            let scene_seed = rng.gen();
            build_scene(format!("{}-{i:02}", shape.name()), shape, pose, config, scene_seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_parse_by_name() {
        for shape in FixtureShape::ALL {
            assert_eq!(shape.name().parse::<FixtureShape>().unwrap(), shape);
        }
        assert!("torus".parse::<FixtureShape>().is_err());
    }

    #[test]
    fn shapes_are_centered_in_a_small_box() {
        for shape in FixtureShape::ALL {
            let cloud = sample_surface(&shape.mesh(), 2000, 1).unwrap();
            let (lo, hi) = cloud.bounds().unwrap();
            assert!(lo.coords.amin() > -0.09 && hi.coords.amax() < 0.09, "{shape}");
            assert!(((lo.coords + hi.coords) / 2.0).norm() < 0.005, "{shape}");
        }
    }

    #[test]
    fn scenes_are_reproducible() {
        let config = SceneConfig {
            array: ArrayConfig {
                count: [4, 4],
                ..ArrayConfig::default()
            },
            points: 200,
            ..SceneConfig::default()
        };
        let a = randomized_scenes(2, &config, 9).unwrap();
        let b = randomized_scenes(2, &config, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.object_id, y.object_id);
            assert_eq!(x.ground_truth, y.ground_truth);
            assert_eq!(x.signals, y.signals);
        }
    }

    #[test]
    fn occlusion_drops_the_far_side() {
        let config = SceneConfig {
            array: ArrayConfig {
                count: [4, 4],
                ..ArrayConfig::default()
            },
            waveform: Waveform::new(77e9, 4e9, 8).unwrap(),
            points: 600,
            snr_db: f64::INFINITY,
            ..SceneConfig::default()
        };
        let gt = sample_surface(&FixtureShape::Sphere.mesh(), config.points, 3).unwrap();
        let array = config.array.build().unwrap();
        let mask = radar_facing_union(&gt, &viewpoints(&array)).unwrap();
        assert!(mask.iter().any(|&m| !m));
        let occluded = SceneConfig {
            self_occlusion: true,
            ..config
        };
        let expected =
            simulate_signals(&gt.masked(&mask), &array, &config.waveform, config.specular_sigma).unwrap();
        assert_eq!(observe(&gt, &occluded, 0).unwrap(), expected);
        assert_ne!(observe(&gt, &config, 0).unwrap(), expected);
    }
}
