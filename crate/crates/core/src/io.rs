//! PLY point-cloud persistence.
//!
//! Every cloud written by this crate is binary little-endian with the vertex
//! properties `x y z nx ny nz` stored as 32-bit floats. Clouds without normals
//! are written with zero normals, and an all-zero normal column reads back as
//! "no normals".

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType,
    ScalarType,
};
use ply_rs::writer::Writer;

use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, Point3, Vector3, NORMAL_TOLERANCE};

const VERTEX: &str = "vertex";
const FIELDS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

pub fn write_cloud_ply(path: impl AsRef<Path>, cloud: &OrientedPointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    write_cloud_ply_to(&mut out, cloud)?;
    out.flush()?;
    Ok(())
}

pub fn write_cloud_ply_to<W: Write>(out: &mut W, cloud: &OrientedPointCloud) -> Result<()> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::BinaryLittleEndian;
    let mut element = ElementDef::new(VERTEX.to_string());
    for name in FIELDS {
        element.properties.add(PropertyDef::new(
            name.to_string(),
            PropertyType::Scalar(ScalarType::Float),
        ));
    }
    element.count = cloud.len();
    ply.header.elements.add(element);

    let zero = Vector3::zeros();
    let vertices = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let n = cloud.normals().map_or(&zero, |n| &n[i]);
            let values = [p.x, p.y, p.z, n.x, n.y, n.z];
            let mut e = DefaultElement::new();
            for (name, v) in FIELDS.iter().zip(values) {
                e.insert(name.to_string(), Property::Float(v as f32));
            }
            e
        })
        .collect();
    ply.payload.insert(VERTEX.to_string(), vertices);
    Writer::new().write_ply(out, &mut ply)?;
    Ok(())
}

pub fn read_cloud_ply(path: impl AsRef<Path>) -> Result<OrientedPointCloud> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    read_cloud_ply_from(&mut reader).map_err(|e| match e {
        Error::Format(message) => Error::parse(path, message),
        other => other,
    })
}

pub fn read_cloud_ply_from<R: Read>(reader: &mut R) -> Result<OrientedPointCloud> {
    let ply = Parser::<DefaultElement>::new()
        .read_ply(reader)
        .map_err(|e| Error::Format(e.to_string()))?;
    let vertices = ply
        .payload
        .get(VERTEX)
        .ok_or_else(|| Error::Format("no vertex element".into()))?;
    let mut points = Vec::with_capacity(vertices.len());
    let mut normals = Vec::with_capacity(vertices.len());
    let mut has_normals = true;
    for (i, v) in vertices.iter().enumerate() {
        let get = |name: &str| v.get(name).and_then(scalar_value);
        let (x, y, z) = match (get("x"), get("y"), get("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::Format(format!("vertex {i} lacks x/y/z"))),
        };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::Format(format!("vertex {i} is not finite")));
        }
        points.push(Point3::new(x, y, z));
        match (get("nx"), get("ny"), get("nz")) {
            (Some(nx), Some(ny), Some(nz)) => normals.push(Vector3::new(nx, ny, nz)),
            _ => has_normals = false,
        }
    }
    let all_zero = normals.iter().all(|n| *n == Vector3::zeros());
    if has_normals && !all_zero {
        // f32 storage keeps unit normals within tolerance; only those written
        // unnormalized are rescaled, so rereading a written cloud is exact.
        let normals = normals
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let len = n.norm();
                if (len - 1.0).abs() <= NORMAL_TOLERANCE {
                    Ok(n)
                } else if len > 0.0 && len.is_finite() {
                    Ok(n / len)
                } else {
                    Err(Error::Format(format!("vertex {i} has a zero normal")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        OrientedPointCloud::with_normals(points, normals).map_err(|e| Error::Format(e.to_string()))
    } else {
        Ok(OrientedPointCloud::from_points(points))
    }
}

pub(crate) fn scalar_value(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

pub(crate) fn list_indices(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

/// Writes `value` as pretty JSON.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::parse(path, e))
}

/// The cloud as stored in a PLY file: writing it and reading it back returns
/// it unchanged.
pub fn ply_round_trip(cloud: &OrientedPointCloud) -> Result<OrientedPointCloud> {
    let once = |c: &OrientedPointCloud| -> Result<OrientedPointCloud> {
        let mut bytes = Vec::new();
        write_cloud_ply_to(&mut bytes, c)?;
        read_cloud_ply_from(&mut bytes.as_slice())
    };
    // A normal rescaled on the first read is f32-exact only after the second.
    once(&once(cloud)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let cloud = OrientedPointCloud::with_normals(
            vec![Point3::new(1.0, 2.0, 3.0)],
            vec![Vector3::new(0.0, 0.0, 1.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_cloud_ply_to(&mut buf, &cloud).unwrap();
        let header_end = buf
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
            + 11;
        let header = std::str::from_utf8(&buf[..header_end]).unwrap();
        assert_eq!(
            header,
            "ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
             property float x\nproperty float y\nproperty float z\n\
             property float nx\nproperty float ny\nproperty float nz\nend_header\n"
        );
        let body = &buf[header_end..];
        assert_eq!(body.len(), 24);
        assert_eq!(&body[0..4], &1.0f32.to_le_bytes());
        assert_eq!(&body[20..24], &1.0f32.to_le_bytes());
    }

    #[test]
    fn round_trip_preserves_f32_values_and_normals() {
        let cloud = OrientedPointCloud::with_normals(
            vec![Point3::new(0.5, -0.25, 2.0), Point3::new(1e-3, 4.0, -7.5)],
            vec![Vector3::x(), Vector3::new(0.0, -1.0, 0.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_cloud_ply_to(&mut buf, &cloud).unwrap();
        let back = read_cloud_ply_from(&mut buf.as_slice()).unwrap();
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((a - b).norm() < 1e-6);
        }
        assert_eq!(back.normals().unwrap(), cloud.normals().unwrap());
    }

    #[test]
    fn clouds_without_normals_read_back_without_normals() {
        let cloud = OrientedPointCloud::from_points(vec![Point3::new(1.0, 1.0, 1.0)]);
        let mut buf = Vec::new();
        write_cloud_ply_to(&mut buf, &cloud).unwrap();
        assert!(read_cloud_ply_from(&mut buf.as_slice())
            .unwrap()
            .normals()
            .is_none());
    }

    #[test]
    fn ascii_input_is_accepted() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\n\
                    property double y\nproperty double z\nend_header\n0 0 0\n1 2 3\n";
        let cloud = read_cloud_ply_from(&mut text.as_bytes()).unwrap();
        assert_eq!(cloud.points()[1], Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let normals: Vec<Vector3> = (0..500)
            .map(|i| {
                let t = i as f64 * 0.731;
                Vector3::new(t.cos(), t.sin(), (t * 0.37).sin())
            })
            .collect();
        let points = (0..500).map(|i| Point3::new(i as f64 * 1e-3, 0.5, -0.25)).collect();
        let cloud = OrientedPointCloud::with_normalized_normals(points, normals).unwrap();
        let stored = ply_round_trip(&cloud).unwrap();
        let mut buf = Vec::new();
        write_cloud_ply_to(&mut buf, &stored).unwrap();
        assert_eq!(read_cloud_ply_from(&mut buf.as_slice()).unwrap(), stored);
    }

    #[test]
    fn garbage_is_a_format_error() {
        assert!(matches!(
            read_cloud_ply_from(&mut &b"not a ply"[..]),
            Err(Error::Format(_))
        ));
    }
}
