use super::*;
use crate::radar::{simulate_signals, SensorArray, Waveform};

fn small_grid() -> VoxelGridSpec {
    VoxelGridSpec::centered(Point3::origin(), 0.004, [16, 16, 16]).unwrap()
}

fn overhead_array() -> SensorArray {
    SensorArray::planar_grid(Point3::new(0.0, 0.0, 0.3), 0.3, 0.3, 8, 8)
}

fn waveform() -> Waveform {
    Waveform::new(77e9, 4e9, 32).unwrap()
}

fn angle_deg(a: &Vector3, b: &Vector3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn full_field(grid: VoxelGridSpec, f: impl Fn(&Point3) -> Vector3) -> NormalField {
    let directions = grid.centers().map(|c| Some(f(&c).normalize())).collect();
    NormalField::new(grid, directions, vec![1.0; grid.len()]).unwrap()
}

#[test]
fn lone_scatterer_direction_matches_its_normal() {
    let grid = small_grid();
    let s = grid.center([9, 6, 8]);
    let normal = (Point3::new(0.0, 0.0, 0.3) - s).normalize();
    let scene = OrientedPointCloud::with_normals(vec![s], vec![normal]).unwrap();
    let sig = simulate_signals(&scene, &overhead_array(), &waveform(), 0.35).unwrap();
    let field = estimate_normal_field(&sig, &grid);
    let l = grid.linear_index([9, 6, 8]);
    let d = field.directions()[l].expect("scatterer voxel is confident");
    assert!(angle_deg(&d, &normal) < 15.0, "{} deg", angle_deg(&d, &normal));
}

#[test]
fn zero_signals_give_no_directions() {
    let sig = simulate_signals(
        &OrientedPointCloud::default(),
        &overhead_array(),
        &waveform(),
        0.35,
    )
    .unwrap();
    let field = estimate_normal_field(&sig, &small_grid());
    assert_eq!(field.num_confident(), 0);
    assert!(matches!(
        sample_isosurfaces(
            &integrate_potential(&field, [0, 0, 0]).unwrap(),
            &field,
            4,
            0.002
        ),
        Err(Error::NoConfidentVoxels)
    ));
}

#[test]
fn flat_plate_directions_point_up() {
    let grid = small_grid();
    let mut points = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            points.push(Point3::new(-0.02 + 0.002 * i as f64, -0.02 + 0.002 * j as f64, 0.002));
        }
    }
    let normals = vec![Vector3::z(); points.len()];
    let scene = OrientedPointCloud::with_normals(points, normals).unwrap();
    let sig = simulate_signals(&scene, &overhead_array(), &waveform(), 0.35).unwrap();
    let field = estimate_normal_field(&sig, &grid);
    let mut on_plate = 0;
    let mut aligned = 0;
    for l in 0..grid.len() {
        let Some(d) = field.directions()[l] else { continue };
        let c = grid.center_of(l);
        if c.x.abs() <= 0.022 && c.y.abs() <= 0.022 && (c.z - 0.002).abs() <= 0.0045 {
            on_plate += 1;
            if angle_deg(&d, &Vector3::z()) < 20.0 {
                aligned += 1;
            }
        }
    }
    assert!(on_plate > 50, "{on_plate} confident plate voxels");
    assert!(aligned as f64 >= 0.8 * on_plate as f64, "{aligned}/{on_plate}");
}

#[test]
fn directions_ignore_a_global_phase() {
    let grid = small_grid();
    let scene = OrientedPointCloud::with_normalized_normals(
        vec![grid.center([3, 4, 5]), grid.center([10, 12, 9])],
        vec![Vector3::new(0.2, 0.1, 1.0), Vector3::new(-0.3, 0.0, 1.0)],
    )
    .unwrap();
    let sig = simulate_signals(&scene, &overhead_array(), &waveform(), 0.35).unwrap();
    let rotated = sig.map_samples(|z| z * Complex64::from_polar(1.0, 1.234));
    let a = estimate_normal_field(&sig, &grid);
    let b = estimate_normal_field(&rotated, &grid);
    let mut compared = 0;
    for (x, y) in a.directions().iter().zip(b.directions()) {
        if let (Some(x), Some(y)) = (x, y) {
            assert!((x - y).norm() < 1e-6);
            compared += 1;
        }
    }
    assert!(compared as f64 > 0.95 * a.num_confident() as f64);
}

#[test]
fn constant_field_integrates_to_the_path_length() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.25, [3, 3, 9]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = integrate_potential(&field, [1, 1, 0]).unwrap();
    for k in 0..9 {
        let v = f.values()[grid.linear_index([1, 1, k])];
        assert!((v - 0.25 * k as f64).abs() < 1e-12);
        // x and y legs are orthogonal to the field.
        assert_eq!(v, f.values()[grid.linear_index([0, 2, k])]);
    }
    assert_eq!(f.values()[grid.linear_index([1, 1, 0])], 0.0);
}

#[test]
fn null_field_integrates_to_zero() {
    let grid = small_grid();
    let field = NormalField::new(grid, vec![None; grid.len()], vec![0.0; grid.len()]).unwrap();
    let f = integrate_potential(&field, default_reference(&grid)).unwrap();
    assert!(f.values().iter().all(|v| *v == 0.0));
}

#[test]
fn gradient_field_recovers_its_potential() {
    let h = 1.0 / 32.0;
    let grid = VoxelGridSpec::new(Point3::origin(), h, [32, 32, 32]).unwrap();
    let gradient: Vec<Vector3> = grid.centers().map(|c| Vector3::new(2.0 * c.x, 0.0, 0.0)).collect();
    for v0 in [[0, 0, 0], [16, 16, 31], [31, 3, 7]] {
        let f = integrate_vector_field(&grid, &gradient, v0).unwrap();
        let x0 = grid.center(v0).x;
        let worst = grid
            .centers()
            .zip(&f)
            .map(|(c, v)| (v - (c.x * c.x - x0 * x0)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 2.0 * h, "error {worst}");
    }
}

#[test]
fn reference_voxel_is_zero_for_arbitrary_fields() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.1, [5, 6, 7]).unwrap();
    let field = full_field(grid, |c| Vector3::new(c.y + 0.3, c.z * c.x - 0.1, 1.0 + c.x));
    for v0 in [[0, 0, 0], [4, 5, 6], [2, 3, 1]] {
        let f = integrate_potential(&field, v0).unwrap();
        assert_eq!(f.values()[grid.linear_index(v0)], 0.0);
        assert_eq!(f.reference(), v0);
    }
}

fn scalar(grid: VoxelGridSpec, f: impl Fn(&Point3) -> f64, v0: [usize; 3]) -> ScalarField {
    let base = f(&grid.center(v0));
    let values = grid.centers().map(|c| f(&c) - base).collect();
    ScalarField::new(grid, values, v0).unwrap()
}

#[test]
fn flat_potential_gives_one_candidate_of_all_confident_voxels() {
    let grid = VoxelGridSpec::new(Point3::origin(), 1.0, [4, 4, 4]).unwrap();
    let mut directions = vec![None; grid.len()];
    for l in (0..grid.len()).step_by(3) {
        directions[l] = Some(Vector3::z());
    }
    let confident = directions.iter().filter(|d| d.is_some()).count();
    let field = NormalField::new(grid, directions, vec![1.0; grid.len()]).unwrap();
    let f = scalar(grid, |_| 0.0, [0, 0, 0]);
    let set = sample_isosurfaces(&f, &field, 1, 1e-9).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.partials()[0].len(), confident);
    // Repeated iso-values collapse.
    assert_eq!(sample_isosurfaces(&f, &field, 6, 0.5).unwrap().len(), 1);
}

#[test]
fn height_potential_gives_five_disjoint_slabs() {
    let h = 0.01;
    let grid = VoxelGridSpec::new(Point3::origin(), h, [10, 10, 10]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = scalar(grid, |c| c.z, [0, 0, 0]);
    let set = sample_isosurfaces(&f, &field, 5, h / 2.0).unwrap();
    assert_eq!(set.len(), 5);
    let mut seen_heights = Vec::new();
    for cloud in set.partials() {
        assert_eq!(cloud.len(), 100);
        let z = cloud.points()[0].z;
        assert!(cloud.points().iter().all(|p| p.z == z));
        assert!(cloud.normals().unwrap().iter().all(|n| *n == Vector3::z()));
        seen_heights.push((z / h).round() as i64);
    }
    assert_eq!(seen_heights, vec![0, 2, 4, 6, 8]);
}

#[test]
fn vanishing_delta_drops_empty_candidates() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.01, [10, 10, 10]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = scalar(grid, |c| c.z, [0, 0, 0]);
    // Four iso-values: 0, 8h/3, 16h/3, 8h. The interior two fall between layers.
    let set = sample_isosurfaces(&f, &field, 4, 1e-9).unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(set.iso_values().len(), 2);
    assert!(set.iso_values()[0] < set.iso_values()[1]);
}

#[test]
fn shifting_the_potential_keeps_membership() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.125, [6, 6, 6]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = scalar(grid, |c| c.z + 0.5 * c.x, [0, 0, 0]);
    let shifted = ScalarField {
        values: f.values().iter().map(|v| v + 4.0).collect(),
        ..f.clone()
    };
    let a = sample_isosurfaces(&f, &field, 7, 0.06).unwrap();
    let b = sample_isosurfaces(&shifted, &field, 7, 0.06).unwrap();
    assert_eq!(a.partials(), b.partials());
}

#[test]
fn well_separated_candidates_are_disjoint() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.05, [8, 8, 8]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = scalar(grid, |c| c.x * c.x + c.y - c.z, [0, 0, 0]);
    let set = sample_isosurfaces(&f, &field, 5, 0.02).unwrap();
    let spacing = set.iso_values().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    assert!(spacing > 2.0 * set.delta());
    for (i, a) in set.partials().iter().enumerate() {
        for b in &set.partials()[i + 1..] {
            assert!(a.points().iter().all(|p| !b.points().contains(p)));
        }
    }
}

#[test]
fn candidate_directory_round_trip() {
    let grid = VoxelGridSpec::new(Point3::origin(), 0.01, [6, 6, 6]).unwrap();
    let field = full_field(grid, |_| Vector3::z());
    let f = scalar(grid, |c| c.z, [0, 0, 0]);
    let set = sample_isosurfaces(&f, &field, 3, 0.005).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let records = write_candidates(dir.path(), &set).unwrap();
    assert_eq!(records.len(), set.len());
    assert_eq!(records[1].num_points, set.partials()[1].len());
    let back = read_candidates(dir.path()).unwrap();
    assert_eq!(back.iso_values(), set.iso_values());
    for (a, b) in back.partials().iter().zip(set.partials()) {
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((p - q).norm() < 1e-7);
        }
    }
}
