use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::DefaultElement;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OrientedPointCloud, Point3, Vector3};
use crate::error::{Error, Result};
use crate::io::{list_indices, scalar_value};

/// Vertices closer than this are merged during ingestion.
const VERTEX_MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a cleaned mesh: near-duplicate vertices merged, degenerate faces dropped,
    /// unreferenced vertices removed.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidInput(format!(
                "face {f:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| p.coords.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput("non-finite vertex".into()));
        }

        // Merge vertices on a 1e-9 lattice.
        let mut remap = Vec::with_capacity(vertices.len());
        let mut merged: Vec<Point3> = Vec::new();
        let mut seen: HashMap<[i64; 3], usize> = HashMap::new();
        for p in &vertices {
            let key = [p.x, p.y, p.z].map(|c| (c / VERTEX_MERGE_TOLERANCE).round() as i64);
            let idx = *seen.entry(key).or_insert_with(|| {
                merged.push(*p);
                merged.len() - 1
            });
            remap.push(idx);
        }

        let diag2 = bounding_diagonal2(&merged);
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .map(|f| f.map(|i| remap[i]))
            .filter(|&[a, b, c]| {
                a != b
                    && b != c
                    && a != c
                    && triangle_area(&merged[a], &merged[b], &merged[c]) > 1e-12 * diag2
            })
            .collect();
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }

        // Compact to referenced vertices, in first-use order.
        let mut compact = vec![usize::MAX; merged.len()];
        let mut kept = Vec::new();
        let faces = faces
            .into_iter()
            .map(|f| {
                f.map(|i| {
                    if compact[i] == usize::MAX {
                        compact[i] = kept.len();
                        kept.push(merged[i]);
                    }
                    compact[i]
                })
            })
            .collect();
        Ok(Self {
            vertices: kept,
            faces,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        self.faces[face].map(|i| self.vertices[i])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(&a, &b, &c)
    }

    /// Unit normal from the face winding (counter-clockwise is front).
    pub fn face_normal(&self, face: usize) -> Vector3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted surface centroid.
    pub fn centroid(&self) -> Point3 {
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.triangle(f);
            let area = triangle_area(&a, &b, &c);
            acc += (a.coords + b.coords + c.coords) / 3.0 * area;
            total += area;
        }
        Point3::from(acc / total)
    }

    /// Applies `f` to every vertex. Fails if the result has no valid faces.
    pub fn transformed(&self, f: impl Fn(&Point3) -> Point3) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Sign applied to winding normals so that, weighted by area, they point away
    /// from the centroid.
    fn orientation_sign(&self) -> f64 {
        let centroid = self.centroid();
        let vote: f64 = (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                let center = Point3::from((a.coords + b.coords + c.coords) / 3.0);
                let area = triangle_area(&a, &b, &c);
                area * self.face_normal(f).dot(&(center - centroid)).signum()
            })
            .sum();
        if vote < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn bounding_diagonal2(points: &[Point3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (lo, hi) = points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm_squared()
}

/// Loads an ASCII OBJ or ASCII/binary PLY mesh, chosen by file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let (vertices, faces) = match ext.as_deref() {
        Some("obj") => read_obj(path)?,
        Some("ply") => read_ply_mesh(path)?,
        _ => return Err(Error::UnsupportedFormat(path.display().to_string())),
    };
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::InvalidInput(m) => Error::parse(path, m),
        other => other,
    })
}

type RawMesh = (Vec<Point3>, Vec<[usize; 3]>);

fn read_obj(path: &Path) -> Result<RawMesh> {
    let mut reader = BufReader::new(File::open(path)?);
    let options = tobj::LoadOptions {
        triangulate: true,
        ..Default::default()
    };
    let (models, _materials) =
        tobj::load_obj_buf(&mut reader, &options, |_| Err(tobj::LoadError::OpenFileFailed))
            .map_err(|e| Error::parse(path, e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for model in models {
        let base = vertices.len();
        let mesh = model.mesh;
        vertices.extend(
            mesh.positions
                .chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2])),
        );
        faces.extend(mesh.indices.chunks_exact(3).map(|c| {
            [
                base + c[0] as usize,
                base + c[1] as usize,
                base + c[2] as usize,
            ]
        }));
    }
    Ok((vertices, faces))
}

fn read_ply_mesh(path: &Path) -> Result<RawMesh> {
    let mut reader = BufReader::new(File::open(path)?);
    let ply = Parser::<DefaultElement>::new()
        .read_ply(&mut reader)
        .map_err(|e| Error::parse(path, e))?;
    let raw_vertices = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::parse(path, "no vertex element"))?;
    let vertices = raw_vertices
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let get = |n: &str| v.get(n).and_then(scalar_value);
            match (get("x"), get("y"), get("z")) {
                (Some(x), Some(y), Some(z)) => Ok(Point3::new(x, y, z)),
                _ => Err(Error::parse(path, format!("vertex {i} lacks x/y/z"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut faces = Vec::new();
    for (i, face) in ply.payload.get("face").into_iter().flatten().enumerate() {
        let list = face
            .get("vertex_indices")
            .or_else(|| face.get("vertex_index"))
            .and_then(list_indices)
            .ok_or_else(|| Error::parse(path, format!("face {i} has no index list")))?;
        if list.iter().any(|&j| j < 0) {
            return Err(Error::parse(path, format!("face {i} has a negative index")));
        }
        // Fan-triangulate polygons.
        for k in 1..list.len().saturating_sub(1) {
            faces.push([list[0] as usize, list[k] as usize, list[k + 1] as usize]);
        }
    }
    Ok((vertices, faces))
}

/// Samples exactly `n` points uniformly by area.
///
/// Per-face counts use systematic allocation (a single random offset over the
/// cumulative area), so every face receives `floor` or `ceil` of its expected
/// share. Normals come from face winding, flipped globally to point outward.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<OrientedPointCloud> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();

    let offset: f64 = rng.gen();
    let mut counts = vec![0usize; areas.len()];
    let mut face = 0;
    let mut cumulative = areas[0];
    for j in 0..n {
        let target = (j as f64 + offset) / n as f64 * total;
        while target >= cumulative && face + 1 < areas.len() {
            face += 1;
            cumulative += areas[face];
        }
        counts[face] += 1;
    }

    let sign = mesh.orientation_sign();
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for (f, &count) in counts.iter().enumerate() {
        let [a, b, c] = mesh.triangle(f);
        let normal = mesh.face_normal(f) * sign;
        for _ in 0..count {
            let r1: f64 = rng.gen::<f64>().sqrt();
            let r2: f64 = rng.gen();
            let p = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
            points.push(Point3::from(p));
            normals.push(normal);
        }
    }
    OrientedPointCloud::with_normals(points, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use std::io::Write;

    fn write_temp(ext: &str, body: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(body).unwrap();
        f.flush().unwrap();
        f
    }

    const CUBE_OBJ: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\n\
f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

    #[test]
    fn single_triangle_obj() {
        let f = write_temp(".obj", b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.vertices().len(), 3);
        assert_eq!(mesh.faces().len(), 1);
    }

    #[test]
    fn unit_cube_obj() {
        let f = write_temp(".obj", CUBE_OBJ.as_bytes());
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.faces().len(), 12);
    }

    #[test]
    fn zero_area_face_is_dropped() {
        // Extra collinear vertices 9, 10 and a zero-area face between them and vertex 1.
        let body = format!("{CUBE_OBJ}v 2 0 0\nv 3 0 0\nf 2 9 10\n");
        let f = write_temp(".obj", body.as_bytes());
        let raw_faces = body.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(raw_faces, 13);
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.faces().len(), 12);
    }

    #[test]
    fn one_degenerate_face_among_twelve_leaves_eleven() {
        // Collapse one cube face by duplicating a vertex index after remap.
        let mut body = CUBE_OBJ.replace("f 1 3 2\n", "f 1 1 2\n");
        body.push('\n');
        let f = write_temp(".obj", body.as_bytes());
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.faces().len(), 11);
    }

    #[test]
    fn duplicate_vertices_within_tolerance_merge() {
        let f = write_temp(
            ".obj",
            b"v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1.0000000000001 0 0\nv 1 1 0\nf 1 2 3\nf 4 5 3\n",
        );
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.vertices().len(), 4);
    }

    #[test]
    fn ascii_ply_mesh_with_quads() {
        let body = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n\
                    property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let f = write_temp(".ply", body.as_bytes());
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.faces().len(), 2);
    }

    #[test]
    fn malformed_and_empty_inputs() {
        let f = write_temp(".obj", b"v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
        assert!(matches!(load_mesh(f.path()), Err(Error::EmptyMesh)));
        let f = write_temp(".obj", b"v 0 0 0\nf 1 2 3\n");
        assert!(matches!(load_mesh(f.path()), Err(Error::Parse { .. })));
        let f = write_temp(".ply", b"ply\nformat nonsense\n");
        assert!(matches!(load_mesh(f.path()), Err(Error::Parse { .. })));
        let f = write_temp(".stl", b"solid");
        assert!(matches!(load_mesh(f.path()), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn cube_face_counts_follow_area() {
        let cube = primitives::cuboid(1.0, 1.0, 1.0);
        let cloud = sample_surface(&cube, 6000, 5).unwrap();
        let mut per_face = [0usize; 6];
        for p in cloud.points() {
            let axis = if (p.x.abs() - 0.5).abs() < 1e-12 {
                0
            } else if (p.y.abs() - 0.5).abs() < 1e-12 {
                1
            } else {
                2
            };
            let side = (p[axis] > 0.0) as usize;
            per_face[axis * 2 + side] += 1;
        }
        // Multinomial sigma for p = 1/6, n = 6000.
        let sigma = (6000.0 * (1.0 / 6.0) * (5.0 / 6.0) as f64).sqrt();
        for c in per_face {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{per_face:?}");
        }
    }

    #[test]
    fn normals_point_outward_even_for_inverted_winding() {
        let cube = primitives::cuboid(1.0, 1.0, 1.0);
        let flipped = TriangleMesh::new(
            cube.vertices().to_vec(),
            cube.faces().iter().map(|&[a, b, c]| [a, c, b]).collect(),
        )
        .unwrap();
        for mesh in [cube, flipped] {
            let cloud = sample_surface(&mesh, 600, 1).unwrap();
            let center = Point3::origin();
            for (p, n) in cloud.points().iter().zip(cloud.normals().unwrap()) {
                assert!(n.dot(&(p - center)) > 0.0);
            }
        }
    }

    #[test]
    fn single_sample_lies_on_a_face_plane() {
        let mesh = primitives::cylinder(0.3, 1.0, 24);
        let cloud = sample_surface(&mesh, 1, 42).unwrap();
        let p = cloud.points()[0];
        let on_some_face = (0..mesh.faces().len()).any(|f| {
            let [a, _, _] = mesh.triangle(f);
            mesh.face_normal(f).dot(&(p - a)).abs() < 1e-9
        });
        assert!(on_some_face);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mesh = primitives::uv_sphere(1.0, 16, 32);
        let a = sample_surface(&mesh, 500, 9).unwrap();
        let b = sample_surface(&mesh, 500, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_surface(&mesh, 500, 10).unwrap();
        assert_ne!(a, c);
    }
}
