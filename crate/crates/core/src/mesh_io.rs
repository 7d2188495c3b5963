//! PLY (ASCII and binary) and OBJ mesh reading and writing.
//!
//! Polygons with more than three corners are fan-triangulated on load. Vertex
//! colors are read from `red`/`green`/`blue` properties (8-bit or float) in
//! PLY and from the optional trailing `r g b` of OBJ `v` records.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "ply" => Some(MeshFormat::Ply),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Loads and validates a PLY or OBJ mesh, choosing the parser by extension.
pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let format = MeshFormat::from_path(path).ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let raw = match format {
        MeshFormat::Ply => read_ply(reader).map_err(|d| Error::parse(path, d))?,
        MeshFormat::Obj => read_obj(reader).map_err(|d| Error::parse(path, d))?,
    };
    tracing::debug!(
        "loaded {}: {} vertices, {} faces",
        path.display(),
        raw.vertices.len(),
        raw.faces.len()
    );
    raw.into_mesh()
}

/// Writes binary PLY (`.ply`) or OBJ (`.obj`).
pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Ply) => save_ply(path, mesh, false),
        Some(MeshFormat::Obj) => save_obj(path, mesh),
        None => Err(Error::UnsupportedFormat(path.display().to_string())),
    }
}

struct RawMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<i64>>,
    colors: Option<Vec<[f32; 3]>>,
}

impl RawMesh {
    fn into_mesh(self) -> Result<TriMesh> {
        let n = self.vertices.len() as i64;
        let mut faces = Vec::with_capacity(self.faces.len());
        for (fi, poly) in self.faces.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidMesh(format!("face {fi} has {} corners", poly.len())));
            }
            for &i in poly {
                if i < 0 || i >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {i} but the mesh has {n} vertices"
                    )));
                }
            }
            for k in 1..poly.len() - 1 {
                faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
            }
        }
        TriMesh::new(self.vertices, faces, self.colors)
    }
}

// ---------------------------------------------------------------- PLY

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn read_ply<R: BufRead>(mut reader: R) -> std::result::Result<RawMesh, String> {
    let mut line = String::new();
    let next_line = |reader: &mut R, line: &mut String| -> std::result::Result<(), String> {
        line.clear();
        let n = reader.read_line(line).map_err(|e| e.to_string())?;
        if n == 0 {
            return Err("unexpected end of header".into());
        }
        Ok(())
    };

    next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err("missing 'ply' magic".into());
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next_line(&mut reader, &mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLe,
                    "binary_big_endian" => PlyEncoding::BinaryBe,
                    other => return Err(format!("unknown PLY format {other}")),
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format!("bad element count {count:?}"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or("property before element")?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::List {
                        count: Scalar::parse(count).ok_or(format!("bad type {count}"))?,
                        item: Scalar::parse(item).ok_or(format!("bad type {item}"))?,
                    },
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or("property before element")?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind: PropKind::Scalar(Scalar::parse(ty).ok_or(format!("bad type {ty}"))?),
                });
            }
            ["end_header"] => break,
            other => return Err(format!("unrecognized header line {other:?}")),
        }
    }
    let encoding = encoding.ok_or("missing format line")?;

    let mut body: Box<dyn ValueReader + '_> = match encoding {
        PlyEncoding::Ascii => Box::new(AsciiValues::new(&mut reader)),
        PlyEncoding::BinaryLe => Box::new(BinaryValues {
            reader: &mut reader,
            little: true,
        }),
        PlyEncoding::BinaryBe => Box::new(BinaryValues {
            reader: &mut reader,
            little: false,
        }),
    };

    let mut vertices = Vec::new();
    let mut colors: Option<Vec<[f32; 3]>> = None;
    let mut faces = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let find = |n: &str| el.props.iter().position(|p| p.name == n);
                let xyz = [find("x"), find("y"), find("z")];
                if xyz.iter().any(Option::is_none) {
                    return Err("vertex element lacks x/y/z".into());
                }
                let rgb = [find("red"), find("green"), find("blue")];
                let has_color = rgb.iter().all(Option::is_some);
                vertices.reserve(el.count);
                let mut cols = Vec::new();
                let mut values = vec![0.0f64; el.props.len()];
                for _ in 0..el.count {
                    for (k, p) in el.props.iter().enumerate() {
                        values[k] = match p.kind {
                            PropKind::Scalar(s) => {
                                let v = body.scalar(s)?;
                                if has_color && rgb.contains(&Some(k)) && !s.is_float() {
                                    v / 255.0
                                } else {
                                    v
                                }
                            }
                            PropKind::List { count, item } => {
                                let n = body.scalar(count)? as usize;
                                for _ in 0..n {
                                    body.scalar(item)?;
                                }
                                0.0
                            }
                        };
                    }
                    vertices.push([
                        values[xyz[0].unwrap()],
                        values[xyz[1].unwrap()],
                        values[xyz[2].unwrap()],
                    ]);
                    if has_color {
                        cols.push([
                            values[rgb[0].unwrap()] as f32,
                            values[rgb[1].unwrap()] as f32,
                            values[rgb[2].unwrap()] as f32,
                        ]);
                    }
                }
                if has_color {
                    colors = Some(cols);
                }
            }
            "face" => {
                let idx = el
                    .props
                    .iter()
                    .position(|p| p.name == "vertex_indices" || p.name == "vertex_index")
                    .ok_or("face element lacks vertex_indices")?;
                faces.reserve(el.count);
                for _ in 0..el.count {
                    for (k, p) in el.props.iter().enumerate() {
                        match p.kind {
                            PropKind::Scalar(s) => {
                                body.scalar(s)?;
                            }
                            PropKind::List { count, item } => {
                                let n = body.scalar(count)? as usize;
                                let mut poly = Vec::with_capacity(n);
                                for _ in 0..n {
                                    poly.push(body.scalar(item)? as i64);
                                }
                                if k == idx {
                                    faces.push(poly);
                                }
                            }
                        }
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    for p in &el.props {
                        match p.kind {
                            PropKind::Scalar(s) => {
                                body.scalar(s)?;
                            }
                            PropKind::List { count, item } => {
                                let n = body.scalar(count)? as usize;
                                for _ in 0..n {
                                    body.scalar(item)?;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(RawMesh {
        vertices,
        faces,
        colors,
    })
}

trait ValueReader {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String>;
}

struct AsciiValues<'a, R: BufRead> {
    reader: &'a mut R,
    tokens: std::vec::IntoIter<String>,
}

impl<'a, R: BufRead> AsciiValues<'a, R> {
    fn new(reader: &'a mut R) -> Self {
        AsciiValues {
            reader,
            tokens: Vec::new().into_iter(),
        }
    }
}

impl<R: BufRead> ValueReader for AsciiValues<'_, R> {
    fn scalar(&mut self, _ty: Scalar) -> std::result::Result<f64, String> {
        loop {
            if let Some(t) = self.tokens.next() {
                return t.parse().map_err(|_| format!("bad number {t:?}"));
            }
            let mut line = String::new();
            if self.reader.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
                return Err("unexpected end of data".into());
            }
            self.tokens = line
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
                .into_iter();
        }
    }
}

struct BinaryValues<'a, R: Read> {
    reader: &'a mut R,
    little: bool,
}

impl<R: Read> ValueReader for BinaryValues<'_, R> {
    fn scalar(&mut self, ty: Scalar) -> std::result::Result<f64, String> {
        let mut buf = [0u8; 8];
        let n = ty.size();
        self.reader
            .read_exact(&mut buf[..n])
            .map_err(|_| "unexpected end of data".to_string())?;
        if !self.little {
            buf[..n].reverse();
        }
        Ok(match ty {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

fn quantize(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes PLY with double-precision coordinates and 8-bit colors.
pub fn save_ply(path: &Path, mesh: &TriMesh, ascii: bool) -> Result<()> {
    let mut buf = Vec::new();
    write_ply(&mut buf, mesh, ascii).map_err(|e| Error::io(path, e))?;
    crate::util::write_atomic(path, &buf)
}

fn write_ply<W: Write>(w: &mut W, mesh: &TriMesh, ascii: bool) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    if ascii {
        writeln!(w, "format ascii 1.0")?;
    } else {
        writeln!(w, "format binary_little_endian 1.0")?;
    }
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    let colors = mesh.colors();
    if colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        if ascii {
            write!(w, "{} {} {}", v[0], v[1], v[2])?;
            if let Some(c) = colors {
                let c = c[i];
                write!(w, " {} {} {}", quantize(c[0]), quantize(c[1]), quantize(c[2]))?;
            }
            writeln!(w)?;
        } else {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            if let Some(c) = colors {
                let c = c[i];
                w.write_all(&[quantize(c[0]), quantize(c[1]), quantize(c[2])])?;
            }
        }
    }
    for f in mesh.faces() {
        if ascii {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        } else {
            w.write_all(&[3u8])?;
            for &i in f {
                w.write_all(&(i as i32).to_le_bytes())?;
            }
        }
    }
    w.flush()
}

// ---------------------------------------------------------------- OBJ

fn read_obj<R: BufRead>(reader: R) -> std::result::Result<RawMesh, String> {
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let vals: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| format!("line {}: bad vertex", lineno + 1))?;
                if vals.len() < 3 {
                    return Err(format!("line {}: vertex needs 3 coordinates", lineno + 1));
                }
                vertices.push([vals[0], vals[1], vals[2]]);
                if vals.len() >= 6 {
                    colors.push([vals[3] as f32, vals[4] as f32, vals[5] as f32]);
                }
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let mut poly = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| format!("line {}: bad face index {t:?}", lineno + 1))?;
                    let resolved = match idx {
                        0 => return Err(format!("line {}: face index 0", lineno + 1)),
                        i if i > 0 => i - 1,
                        i => n + i,
                    };
                    poly.push(resolved);
                }
                faces.push(poly);
            }
            _ => {}
        }
    }
    let colors = (!colors.is_empty() && colors.len() == vertices.len()).then_some(colors);
    Ok(RawMesh {
        vertices,
        faces,
        colors,
    })
}

pub fn save_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    let mut buf = Vec::new();
    let write = |w: &mut Vec<u8>| -> std::io::Result<()> {
        for (i, v) in mesh.vertices().iter().enumerate() {
            match mesh.colors() {
                Some(c) => writeln!(w, "v {} {} {} {} {} {}", v[0], v[1], v[2], c[i][0], c[i][1], c[i][2])?,
                None => writeln!(w, "v {} {} {}", v[0], v[1], v[2])?,
            }
        }
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    };
    write(&mut buf).map_err(|e| Error::io(path, e))?;
    crate::util::write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const TETRA_PLY: &str = "ply\nformat ascii 1.0\ncomment tetra\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 4\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn ascii_tetrahedron() {
        let mesh = read_ply(Cursor::new(TETRA_PLY)).unwrap().into_mesh().unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.face_count(), 4);
        assert!(mesh.colors().is_none());
    }

    #[test]
    fn obj_out_of_range_index() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 9\n";
        let err = read_obj(Cursor::new(src)).unwrap().into_mesh().unwrap_err();
        assert!(err.to_string().contains("vertex 8"), "{err}");
    }

    #[test]
    fn obj_quads_and_relative_indices() {
        let src = "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 1 1 0 0 0 1\nv 0 1 0 1 1 1\nf -4/1/1 -3/2/2 -2/3/3 -1/4/4\n";
        let mesh = read_obj(Cursor::new(src)).unwrap().into_mesh().unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(mesh.colors().unwrap()[3], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn big_endian_binary() {
        let mut data = b"ply\nformat binary_big_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for (v, c) in [
            ([0f32, 0., 0.], [255u8, 0, 0]),
            ([1., 0., 0.], [0, 255, 0]),
            ([0., 1., 0.], [0, 0, 255]),
        ] {
            for x in v {
                data.extend_from_slice(&x.to_be_bytes());
            }
            data.extend_from_slice(&c);
        }
        data.push(3);
        for i in [0u32, 1, 2] {
            data.extend_from_slice(&i.to_be_bytes());
        }
        let mesh = read_ply(Cursor::new(data)).unwrap().into_mesh().unwrap();
        assert_eq!(mesh.vertices()[1], [1.0, 0.0, 0.0]);
        assert_eq!(mesh.colors().unwrap()[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn truncated_body_is_an_error() {
        let src = &TETRA_PLY[..TETRA_PLY.len() - 10];
        assert!(read_ply(Cursor::new(src)).is_err());
    }
}
