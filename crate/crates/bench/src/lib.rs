//! Inputs shared by the criterion benches.

use mmrecon::fixtures::{build_scene, ArrayConfig, FixtureScene, FixtureShape, Pose, SceneConfig};
use mmrecon::imaging::VoxelGridSpec;
use mmrecon::radar::Waveform;
use mmrecon::Point3;

/// A cube scene seen by a 12×12 array with 16 samples per chirp.
pub fn bench_scene() -> FixtureScene {
    let config = SceneConfig {
        array: ArrayConfig {
            count: [12, 12],
            ..ArrayConfig::default()
        },
        waveform: Waveform::new(77e9, 4e9, 16).expect("valid waveform"),
        points: 2000,
        ..SceneConfig::default()
    };
    build_scene("cube", FixtureShape::Cube, Pose::default(), &config, 1).expect("scene builds")
}

/// Cubic grid of `n` voxels per side at 4 mm around the origin.
pub fn bench_grid(n: usize) -> VoxelGridSpec {
    VoxelGridSpec::centered(Point3::origin(), 0.004, [n; 3]).expect("valid grid")
}
