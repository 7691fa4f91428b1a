//! Closed, outward-wound primitive meshes centered on the origin.

use std::f64::consts::PI;

use super::{Point3, TriangleMesh};

fn quad(faces: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize, d: usize) {
    faces.push([a, b, c]);
    faces.push([a, c, d]);
}

/// Axis-aligned box with the given side lengths.
pub fn cuboid(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -sx / 2.0 } else { sx / 2.0 },
                if i & 2 == 0 { -sy / 2.0 } else { sy / 2.0 },
                if i & 4 == 0 { -sz / 2.0 } else { sz / 2.0 },
            )
        })
        .collect();
    let mut faces = Vec::with_capacity(12);
    quad(&mut faces, 0, 2, 3, 1);
    quad(&mut faces, 4, 5, 7, 6);
    quad(&mut faces, 0, 1, 5, 4);
    quad(&mut faces, 2, 6, 7, 3);
    quad(&mut faces, 0, 4, 6, 2);
    quad(&mut faces, 1, 3, 7, 5);
    TriangleMesh::new(vertices, faces).expect("cuboid is valid")
}

/// Latitude/longitude sphere.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = 2.0 * PI * j as f64 / slices as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    let south = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -radius));

    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            quad(
                &mut faces,
                ring(i, j),
                ring(i + 1, j),
                ring(i + 1, j + 1),
                ring(i, j + 1),
            );
        }
    }
    TriangleMesh::new(vertices, faces).expect("sphere is valid")
}

/// Extrudes a counter-clockwise (y, z) polygon along x over `length`.
///
/// Caps are fan-triangulated from the first vertex, so the polygon must be
/// star-shaped with respect to it.
pub fn prism(polygon: &[(f64, f64)], length: f64) -> TriangleMesh {
    let n = polygon.len();
    assert!(n >= 3);
    let half = length / 2.0;
    let mut vertices: Vec<Point3> = polygon
        .iter()
        .map(|&(y, z)| Point3::new(-half, y, z))
        .collect();
    vertices.extend(polygon.iter().map(|&(y, z)| Point3::new(half, y, z)));
    let mut faces = Vec::new();
    for k in 1..n - 1 {
        faces.push([n, n + k, n + k + 1]);
        faces.push([0, k + 1, k]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        quad(&mut faces, i, j, n + j, n + i);
    }
    TriangleMesh::new(vertices, faces).expect("prism is valid")
}

/// Cylinder with its axis along x.
pub fn cylinder(radius: f64, length: f64, segments: usize) -> TriangleMesh {
    let polygon: Vec<(f64, f64)> = (0..segments)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / segments as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect();
    prism(&polygon, length)
}

/// L-shaped bracket: two perpendicular plates of width `arm` and thickness
/// `thickness`, extruded along x over `length`, centered on its bounding box.
pub fn l_bracket(arm: f64, thickness: f64, length: f64) -> TriangleMesh {
    let (a, t) = (arm, thickness);
    let c = a / 2.0;
    let polygon = [
        (0.0, 0.0),
        (a, 0.0),
        (a, t),
        (t, t),
        (t, a),
        (0.0, a),
    ]
    .map(|(y, z)| (y - c, z - c));
    prism(&polygon, length)
}
