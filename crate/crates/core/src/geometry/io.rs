//! Point-cloud files: PLY (ASCII and binary little-endian) and whitespace XYZ text.
//!
//! Only `vertex` elements are interpreted. Any scalar vertex property is read; the
//! cloud uses `x,y,z` and, when all three exist, `nx,ny,nz`. Writers emit binary
//! little-endian float32 by default.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(Error::Parse(format!("unsupported PLY scalar type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

/// Raw vertex table of a PLY file.
#[derive(Debug, Clone, Default)]
pub struct PlyTable {
    pub comments: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PlyTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_cloud(&self) -> Result<PointCloud> {
        let get = |n: &str| self.column(n).ok_or_else(|| Error::Parse(format!("PLY vertex lacks `{n}`")));
        let (x, y, z) = (get("x")?, get("y")?, get("z")?);
        let points: Vec<Vec3> = (0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
        match (self.column("nx"), self.column("ny"), self.column("nz")) {
            (Some(nx), Some(ny), Some(nz)) => {
                let normals = (0..nx.len()).map(|i| Vec3::new(nx[i], ny[i], nz[i]).normalize()).collect();
                PointCloud::with_normals(points, normals)
            }
            _ => PointCloud::new(points),
        }
    }
}

struct ElementHeader {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarType)>,
    has_list: bool,
}

pub fn read_ply_table(path: impl AsRef<Path>) -> Result<PlyTable> {
    let mut reader = BufReader::new(File::open(path)?);
    parse_ply(&mut reader)
}

pub fn parse_ply(reader: &mut impl BufRead) -> Result<PlyTable> {
    let mut line = String::new();
    let next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<()> {
        line.clear();
        if reader.read_line(line)? == 0 {
            return Err(Error::Parse("unexpected end of PLY header".into()));
        }
        Ok(())
    };
    next_line(reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Parse("missing `ply` magic".into()));
    }
    let mut encoding = None;
    let mut comments = Vec::new();
    let mut elements: Vec<ElementHeader> = Vec::new();
    loop {
        next_line(reader, &mut line)?;
        let trimmed = line.trim();
        let mut tok = trimmed.split_whitespace();
        match tok.next() {
            Some("format") => {
                encoding = Some(match tok.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    other => return Err(Error::Parse(format!("unsupported PLY format {other:?}"))),
                })
            }
            Some("comment") => comments.push(trimmed.strip_prefix("comment").unwrap_or("").trim().to_string()),
            Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().unwrap_or_default().to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Parse("bad element count".into()))?;
                elements.push(ElementHeader { name, count, properties: Vec::new(), has_list: false });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| Error::Parse("property before element".into()))?;
                let ty = tok.next().unwrap_or_default();
                if ty == "list" {
                    el.has_list = true;
                } else {
                    let name = tok.next().unwrap_or_default().to_string();
                    el.properties.push((name, ScalarType::parse(ty)?));
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Parse("PLY header lacks format".into()))?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::Parse("PLY has no vertex element".into()))?;
    if elements[..vertex_pos].iter().any(|e| e.count > 0) {
        return Err(Error::Parse("vertex element must come first".into()));
    }
    let vertex = &elements[vertex_pos];
    if vertex.has_list {
        return Err(Error::Parse("list properties on vertices are not supported".into()));
    }
    let mut columns: Vec<(String, Vec<f64>)> =
        vertex.properties.iter().map(|(n, _)| (n.clone(), Vec::with_capacity(vertex.count))).collect();
    match encoding {
        PlyEncoding::Ascii => {
            for _ in 0..vertex.count {
                next_line(reader, &mut line)?;
                for ((_, c), v) in columns.iter_mut().zip(parse_row(&line, vertex.properties.len())?) {
                    c.push(v);
                }
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let stride: usize = vertex.properties.iter().map(|(_, t)| t.size()).sum();
            let mut buf = vec![0u8; stride];
            for _ in 0..vertex.count {
                reader.read_exact(&mut buf)?;
                let mut off = 0;
                for ((_, ty), (_, col)) in vertex.properties.iter().zip(columns.iter_mut()) {
                    col.push(ty.read_le(&buf[off..off + ty.size()]));
                    off += ty.size();
                }
            }
        }
    }
    Ok(PlyTable { comments, columns })
}

fn parse_row(line: &str, n: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line.split_whitespace().take(n).map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(
        |e| Error::Parse(format!("bad ASCII vertex row: {e}")),
    )?;
    if vals.len() != n {
        return Err(Error::Parse("short ASCII vertex row".into()));
    }
    Ok(vals)
}

/// Writes a float32 vertex table.
pub fn write_ply_table(
    path: impl AsRef<Path>,
    encoding: PlyEncoding,
    comments: &[String],
    columns: &[(&str, Vec<f32>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_ply_table(&mut w, encoding, comments, columns)?;
    w.flush()?;
    Ok(())
}

pub fn encode_ply_table(
    w: &mut impl Write,
    encoding: PlyEncoding,
    comments: &[String],
    columns: &[(&str, Vec<f32>)],
) -> Result<()> {
    let n = columns.first().map_or(0, |(_, v)| v.len());
    if columns.iter().any(|(_, v)| v.len() != n) {
        return Err(Error::InvalidInput("PLY columns differ in length".into()));
    }
    writeln!(w, "ply")?;
    match encoding {
        PlyEncoding::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyEncoding::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    writeln!(w, "element vertex {n}")?;
    for (name, _) in columns {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..n {
        match encoding {
            PlyEncoding::Ascii => {
                let row: Vec<String> = columns.iter().map(|(_, v)| format!("{}", v[i])).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for (_, v) in columns {
                    w.write_all(&v[i].to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn cloud_columns(cloud: &PointCloud) -> Vec<(&'static str, Vec<f32>)> {
    let axis = |pts: &[Vec3], a: usize| pts.iter().map(|p| p[a] as f32).collect::<Vec<f32>>();
    let mut cols = vec![("x", axis(cloud.points(), 0)), ("y", axis(cloud.points(), 1)), ("z", axis(cloud.points(), 2))];
    if let Some(n) = cloud.normals() {
        cols.extend([("nx", axis(n, 0)), ("ny", axis(n, 1)), ("nz", axis(n, 2))]);
    }
    cols
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    write_ply_table(path, encoding, &[], &cloud_columns(cloud))
}

pub fn encode_ply(w: &mut impl Write, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    encode_ply_table(w, encoding, &[], &cloud_columns(cloud))
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_ply_table(path)?.to_cloud()
}

/// Whitespace-separated `x y z [nx ny nz]` rows; `#` starts a comment line.
pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let reader = BufReader::new(File::open(path)?);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad XYZ row `{t}`: {e}")))?;
        match v.len() {
            3 => points.push(Vec3::new(v[0], v[1], v[2])),
            6 => {
                points.push(Vec3::new(v[0], v[1], v[2]));
                normals.push(Vec3::new(v[3], v[4], v[5]).normalize());
            }
            n => return Err(Error::Parse(format!("XYZ row with {n} values"))),
        }
    }
    if !normals.is_empty() && normals.len() == points.len() {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    }
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, p) in cloud.points().iter().enumerate() {
        match cloud.normals() {
            Some(n) => writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n[i].x, n[i].y, n[i].z)?,
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Dispatches on extension: `.ply`, or `.xyz`/`.txt`/`.pts`.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "ply" => read_ply(path),
        "xyz" | "txt" | "pts" => read_xyz(path),
        other => Err(Error::InvalidInput(format!("unknown point-cloud extension `{other}`"))),
    }
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "xyz" | "txt" | "pts" => write_xyz(path, cloud),
        _ => write_ply(path, cloud, PlyEncoding::BinaryLittleEndian),
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
}

/// Key/value pairs stored as `comment key=value` header lines.
pub fn comment_map(comments: &[String]) -> HashMap<String, String> {
    comments
        .iter()
        .filter_map(|c| c.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample() -> PointCloud {
        PointCloud::with_normals(
            vec![Vec3::new(0.25, -1.5, 3.0), Vec3::new(1.0, 2.0, -0.5)],
            vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::Ascii] {
            let mut buf = Vec::new();
            encode_ply(&mut buf, &sample(), enc).unwrap();
            let back = parse_ply(&mut Cursor::new(buf)).unwrap().to_cloud().unwrap();
            assert_eq!(back, sample());
        }
    }

    #[test]
    fn reads_foreign_header_with_faces_and_doubles() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment made elsewhere\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [1.0f64, 2.0, 3.0] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        data.push(255);
        let t = parse_ply(&mut Cursor::new(data)).unwrap();
        assert_eq!(t.comments, vec!["made elsewhere".to_string()]);
        assert_eq!(t.to_cloud().unwrap().points()[0], Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn xyz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.xyz");
        write_cloud(&path, &sample()).unwrap();
        assert_eq!(read_cloud(&path).unwrap(), sample());
        assert!(read_cloud(dir.path().join("missing.ply")).is_err());
    }
}
