//! ASCII XYZ and binary little-endian PLY point cloud files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

pub fn read_xyz<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace().map(str::parse::<f64>);
        let mut next = || -> Result<f64> {
            it.next()
                .ok_or_else(|| {
                    Error::Parse(format!("line {}: expected 3 coordinates", lineno + 1))
                })?
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let (x, y, z) = (next()?, next()?, next()?);
        points.push(Point3::new(x, y, z));
    }
    PointCloud::new(points)
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    for p in cloud {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Parse(format!("unsupported PLY type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

/// Reads the vertex element of a `binary_little_endian` PLY file. Extra
/// scalar vertex properties are skipped; list properties are rejected.
pub fn read_ply<R: Read>(reader: R) -> Result<PointCloud> {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Parse("missing `ply` magic".into()));
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Parse("unterminated PLY header".into()));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::Parse(format!("unsupported PLY format `{fmt}`")));
                }
            }
            ["element", name, count] => {
                if *name == "vertex" {
                    vertex_count = Some(
                        count
                            .parse::<usize>()
                            .map_err(|e| Error::Parse(format!("vertex count: {e}")))?,
                    );
                    in_vertex = true;
                    seen_vertex = true;
                } else if !seen_vertex {
                    return Err(Error::Parse(
                        "elements before `vertex` are not supported".into(),
                    ));
                } else {
                    in_vertex = false;
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::Parse(
                    "list properties on vertices are not supported".into(),
                ));
            }
            ["property", ty, name] if in_vertex => {
                props.push((name.to_string(), Scalar::parse(ty)?))
            }
            _ => {}
        }
    }
    let count = vertex_count.ok_or_else(|| Error::Parse("no vertex element".into()))?;
    let find = |axis: &str| -> Result<usize> {
        props
            .iter()
            .position(|(n, _)| n == axis)
            .ok_or_else(|| Error::Parse(format!("vertex property `{axis}` missing")))
    };
    let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);
    let mut offsets = Vec::with_capacity(props.len());
    let mut stride = 0;
    for (_, ty) in &props {
        offsets.push(stride);
        stride += ty.size();
    }
    let mut buf = vec![0u8; stride];
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        reader.read_exact(&mut buf)?;
        let get = |i: usize| props[i].1.decode(&buf[offsets[i]..]);
        points.push(Point3::new(get(ix), get(iy), get(iz)));
    }
    PointCloud::new(points)
}

/// Writes vertices as 32-bit float x/y/z.
pub fn write_ply<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        cloud.len()
    )?;
    let mut buf = Vec::with_capacity(cloud.len() * 12);
    for p in cloud {
        for v in [p.x, p.y, p.z] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn is_ply(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

/// Load by extension: `.ply` is binary PLY, anything else ASCII XYZ.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let file = File::open(path)?;
    if is_ply(path) {
        read_ply(file)
    } else {
        read_xyz(BufReader::new(file))
    }
}

pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if is_ply(path) {
        write_ply(cloud, &mut w)?;
    } else {
        write_xyz(cloud, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_parses_and_skips_comments() {
        let text = "# header\n1 2 3\n\n-0.5 0.25 1e-3\n";
        let c = read_xyz(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1], Point3::new(-0.5, 0.25, 1e-3));
        assert!(read_xyz("1 2\n".as_bytes()).is_err());
        assert!(read_xyz("1 2 x\n".as_bytes()).is_err());
        assert!(read_xyz("1 2 nan\n".as_bytes()).is_err());
    }

    #[test]
    fn ply_skips_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 2\nproperty double x\nproperty uchar red\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for (x, r, y, z) in [(1.5f64, 7u8, 2.0f32, 3.0f32), (-1.0, 0, 0.5, 0.25)] {
            bytes.extend_from_slice(&x.to_le_bytes());
            bytes.push(r);
            bytes.extend_from_slice(&y.to_le_bytes());
            bytes.extend_from_slice(&z.to_le_bytes());
        }
        let c = read_ply(&bytes[..]).unwrap();
        assert_eq!(
            c.points(),
            &[Point3::new(1.5, 2.0, 3.0), Point3::new(-1.0, 0.5, 0.25)]
        );
    }

    #[test]
    fn ply_rejects_ascii() {
        let bytes = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(read_ply(&bytes[..]).is_err());
    }
}
