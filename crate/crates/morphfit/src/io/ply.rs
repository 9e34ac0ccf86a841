//! PLY reading and writing (ascii and binary little-endian).
//!
//! The reader handles general headers: unknown elements and properties are
//! parsed and discarded so that files from other tools load cleanly. Vertices
//! need `x y z` (float or double); `nx ny nz` are picked up when present and
//! kept for point-cloud targets. Faces come from the standard
//! `vertex_indices` (or `vertex_index`) list property and must be triangles.
//!
//! Writers emit `double` coordinates. Binary little-endian output
//! round-trips coordinates bit-exactly; ascii output uses the shortest
//! representation that parses back to the same `f64`, so it round-trips
//! exactly as well.

use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{MorphError, Result};
use crate::mesh::{Mesh, PointCloud};

use super::ParsedGeometry;

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
    fn from_name(name: &str) -> Option<ScalarType> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List {
        name: String,
        count_ty: ScalarType,
        elem_ty: ScalarType,
    },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } => name,
            Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
    header_lines: usize,
}

fn parse_header(bytes: &[u8], source: &str) -> Result<Header> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut lines: Vec<(String, usize)> = Vec::new();
    // The header is ascii by definition; scan byte-wise so the binary body
    // is never interpreted as text.
    loop {
        let start = offset;
        while offset < bytes.len() && bytes[offset] != b'\n' {
            offset += 1;
        }
        if offset >= bytes.len() {
            return Err(MorphError::parse(source, line_no, "missing end_header"));
        }
        let line = String::from_utf8_lossy(&bytes[start..offset])
            .trim_end_matches('\r')
            .to_string();
        offset += 1; // consume '\n'
        line_no += 1;
        let is_end = line.trim() == "end_header";
        lines.push((line, line_no));
        if is_end {
            break;
        }
        if line_no > 10_000 {
            return Err(MorphError::parse(source, line_no, "header too large"));
        }
    }

    if lines.first().map(|(l, _)| l.trim()) != Some("ply") {
        return Err(MorphError::parse(source, 1, "not a PLY file (missing 'ply' magic)"));
    }

    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (line, no) in &lines[1..] {
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        match keyword {
            "format" => {
                let kind = tokens.next().unwrap_or("");
                encoding = Some(match kind {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(MorphError::parse(
                            source,
                            *no,
                            format!("unsupported PLY format '{other}'"),
                        ))
                    }
                });
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = tokens.next().unwrap_or("").to_string();
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| MorphError::parse(source, *no, "bad element count"))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements.last_mut().ok_or_else(|| {
                    MorphError::parse(source, *no, "property before any element")
                })?;
                let first = tokens.next().unwrap_or("");
                if first == "list" {
                    let count_ty = tokens
                        .next()
                        .and_then(ScalarType::from_name)
                        .ok_or_else(|| MorphError::parse(source, *no, "bad list count type"))?;
                    let elem_ty = tokens
                        .next()
                        .and_then(ScalarType::from_name)
                        .ok_or_else(|| MorphError::parse(source, *no, "bad list element type"))?;
                    let name = tokens.next().unwrap_or("").to_string();
                    element.properties.push(Property::List {
                        name,
                        count_ty,
                        elem_ty,
                    });
                } else {
                    let ty = ScalarType::from_name(first).ok_or_else(|| {
                        MorphError::parse(source, *no, format!("unknown property type '{first}'"))
                    })?;
                    let name = tokens.next().unwrap_or("").to_string();
                    element.properties.push(Property::Scalar { name, ty });
                }
            }
            "end_header" => break,
            other => {
                return Err(MorphError::parse(
                    source,
                    *no,
                    format!("unknown header keyword '{other}'"),
                ));
            }
        }
    }

    let encoding =
        encoding.ok_or_else(|| MorphError::parse(source, 1, "missing format declaration"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
        header_lines: line_no,
    })
}

/// Token cursor for ascii bodies, tracking 1-based line numbers.
struct AsciiCursor<'a> {
    tokens: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> AsciiCursor<'a> {
    fn new(text: &'a str, first_line: usize) -> AsciiCursor<'a> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                tokens.push((tok, first_line + i));
            }
        }
        AsciiCursor { tokens, pos: 0 }
    }

    fn next(&mut self, source: &str) -> Result<(&'a str, usize)> {
        let t = self.tokens.get(self.pos).copied().ok_or_else(|| {
            MorphError::parse(source, 0, "unexpected end of ascii data")
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn next_f64(&mut self, source: &str) -> Result<(f64, usize)> {
        let (tok, line) = self.next(source)?;
        let v = tok.parse().map_err(|_| {
            MorphError::parse(source, line, format!("invalid number '{tok}'"))
        })?;
        Ok((v, line))
    }
}

struct BinaryCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BinaryCursor<'a> {
    fn read(&mut self, ty: ScalarType, source: &str) -> Result<f64> {
        let size = ty.size();
        if self.pos + size > self.bytes.len() {
            return Err(MorphError::parse(source, 0, "unexpected end of binary data"));
        }
        let b = &self.bytes[self.pos..self.pos + size];
        self.pos += size;
        let v = match ty {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes([
                b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
            ]),
        };
        Ok(v)
    }
}

enum Body<'a> {
    Ascii(AsciiCursor<'a>),
    Binary(BinaryCursor<'a>),
}

impl<'a> Body<'a> {
    /// Read one scalar; returns (value, line) with line 0 for binary data.
    fn scalar(&mut self, ty: ScalarType, source: &str) -> Result<(f64, usize)> {
        match self {
            Body::Ascii(c) => c.next_f64(source),
            Body::Binary(c) => Ok((c.read(ty, source)?, 0)),
        }
    }
}

pub(crate) fn parse(bytes: &[u8], source: &str) -> Result<ParsedGeometry> {
    let header = parse_header(bytes, source)?;
    let mut body = match header.encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(&bytes[header.body_offset..]).map_err(|_| {
                MorphError::parse(source, header.header_lines, "ascii body is not valid UTF-8")
            })?;
            Body::Ascii(AsciiCursor::new(text, header.header_lines + 1))
        }
        PlyEncoding::BinaryLittleEndian => Body::Binary(BinaryCursor {
            bytes: &bytes[header.body_offset..],
            pos: 0,
        }),
    };

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    let mut has_normals = false;
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                let find = |n: &str| element.properties.iter().position(|p| p.name() == n);
                let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => {
                        return Err(MorphError::parse(
                            source,
                            0,
                            "vertex element lacks x/y/z properties",
                        ))
                    }
                };
                let normal_idx = match (find("nx"), find("ny"), find("nz")) {
                    (Some(a), Some(b), Some(c)) => Some((a, b, c)),
                    _ => None,
                };
                has_normals = normal_idx.is_some();
                vertices.reserve(element.count);
                for _ in 0..element.count {
                    let mut values = [0.0f64; 6]; // x y z nx ny nz
                    for (pi, prop) in element.properties.iter().enumerate() {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                let (v, _) = body.scalar(*ty, source)?;
                                if pi == ix {
                                    values[0] = v;
                                } else if pi == iy {
                                    values[1] = v;
                                } else if pi == iz {
                                    values[2] = v;
                                } else if let Some((a, b, c)) = normal_idx {
                                    if pi == a {
                                        values[3] = v;
                                    } else if pi == b {
                                        values[4] = v;
                                    } else if pi == c {
                                        values[5] = v;
                                    }
                                }
                            }
                            Property::List { count_ty, elem_ty, .. } => {
                                skip_list(&mut body, *count_ty, *elem_ty, source)?;
                            }
                        }
                    }
                    vertices.push(Point3::new(values[0], values[1], values[2]));
                    if has_normals {
                        normals.push(Vector3::new(values[3], values[4], values[5]));
                    }
                }
            }
            "face" => {
                for face_idx in 0..element.count {
                    let mut face: Option<[usize; 3]> = None;
                    for prop in &element.properties {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                body.scalar(*ty, source)?;
                            }
                            Property::List { name, count_ty, elem_ty } => {
                                let is_indices =
                                    name == "vertex_indices" || name == "vertex_index";
                                let (count_f, line) = body.scalar(*count_ty, source)?;
                                let count = count_f as usize;
                                if is_indices && count != 3 {
                                    let loc = if line > 0 {
                                        format!("line {line}")
                                    } else {
                                        format!("face {face_idx}")
                                    };
                                    return Err(MorphError::parse(
                                        source,
                                        line,
                                        format!("non-triangular face at {loc}"),
                                    ));
                                }
                                let mut idx = [0usize; 3];
                                for k in 0..count {
                                    let (v, vline) = body.scalar(*elem_ty, source)?;
                                    if is_indices {
                                        if v < 0.0 || v.fract() != 0.0 || v as usize >= vertices.len() {
                                            return Err(MorphError::parse(
                                                source,
                                                vline,
                                                format!("invalid face vertex index {v}"),
                                            ));
                                        }
                                        idx[k] = v as usize;
                                    }
                                }
                                if is_indices {
                                    face = Some(idx);
                                }
                            }
                        }
                    }
                    let face = face.ok_or_else(|| {
                        MorphError::parse(source, 0, "face element lacks a vertex_indices list")
                    })?;
                    faces.push(face);
                }
            }
            _ => {
                // Unknown element: consume and discard its data.
                for _ in 0..element.count {
                    for prop in &element.properties {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                body.scalar(*ty, source)?;
                            }
                            Property::List { count_ty, elem_ty, .. } => {
                                skip_list(&mut body, *count_ty, *elem_ty, source)?;
                            }
                        }
                    }
                }
            }
        }
    }

    let normals = if has_normals {
        // Normalize on the way in; exporters are sloppy about unit length.
        let mut out = Vec::with_capacity(normals.len());
        for (i, n) in normals.iter().enumerate() {
            let len = n.norm();
            if len < 1e-12 {
                return Err(MorphError::parse(
                    source,
                    0,
                    format!("vertex {i} has a zero-length normal"),
                ));
            }
            out.push(n / len);
        }
        Some(out)
    } else {
        None
    };

    Ok(ParsedGeometry {
        vertices,
        normals,
        faces,
    })
}

fn skip_list(body: &mut Body, count_ty: ScalarType, elem_ty: ScalarType, source: &str) -> Result<()> {
    let (count_f, _) = body.scalar(count_ty, source)?;
    for _ in 0..(count_f as usize) {
        body.scalar(elem_ty, source)?;
    }
    Ok(())
}

// -- writing ---------------------------------------------------------------

/// Deterministic per-part inspection colors (part ids are 1-based).
const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| MorphError::io(path, e))?;
    file.write_all(bytes).map_err(|e| MorphError::io(path, e))
}

fn push_f64(out: &mut Vec<u8>, encoding: PlyEncoding, v: f64, last_in_row: bool) {
    match encoding {
        PlyEncoding::Ascii => {
            out.extend_from_slice(format!("{v}").as_bytes());
            out.push(if last_in_row { b'\n' } else { b' ' });
        }
        PlyEncoding::BinaryLittleEndian => out.extend_from_slice(&v.to_le_bytes()),
    }
}

fn format_line(encoding: PlyEncoding) -> &'static str {
    match encoding {
        PlyEncoding::Ascii => "format ascii 1.0",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0",
    }
}

/// Write a triangle mesh.
pub fn save_mesh(mesh: &Mesh, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(
        format!(
            "ply\n{}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
            format_line(encoding),
            mesh.vertex_count(),
            mesh.faces().len()
        )
        .as_bytes(),
    );
    for v in mesh.vertices() {
        push_f64(&mut out, encoding, v.x, false);
        push_f64(&mut out, encoding, v.y, false);
        push_f64(&mut out, encoding, v.z, true);
    }
    for f in mesh.faces() {
        match encoding {
            PlyEncoding::Ascii => {
                out.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes())
            }
            PlyEncoding::BinaryLittleEndian => {
                out.push(3u8);
                for &v in f {
                    out.extend_from_slice(&(v as i32).to_le_bytes());
                }
            }
        }
    }
    write_all(path, &out)
}

/// Write a point cloud (vertex element only, plus normals when present).
pub fn save_cloud(cloud: &PointCloud, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let mut header = format!(
        "ply\n{}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        format_line(encoding),
        cloud.len()
    );
    if cloud.normals().is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    for (i, p) in cloud.points().iter().enumerate() {
        let has_normals = cloud.normals().is_some();
        push_f64(&mut out, encoding, p.x, false);
        push_f64(&mut out, encoding, p.y, false);
        push_f64(&mut out, encoding, p.z, !has_normals);
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            push_f64(&mut out, encoding, n.x, false);
            push_f64(&mut out, encoding, n.y, false);
            push_f64(&mut out, encoding, n.z, true);
        }
    }
    write_all(path, &out)
}

/// Write a mesh with a per-vertex `part_id` scalar and a fixed inspection
/// color palette, for viewing partitions in external tools.
pub fn save_labeled_mesh(
    mesh: &Mesh,
    labels: &[usize],
    path: &Path,
    encoding: PlyEncoding,
) -> Result<()> {
    if labels.len() != mesh.vertex_count() {
        return Err(MorphError::Invalid(format!(
            "label count {} does not match vertex count {}",
            labels.len(),
            mesh.vertex_count()
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(
        format!(
            "ply\n{}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty int part_id\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
            format_line(encoding),
            mesh.vertex_count(),
            mesh.faces().len()
        )
        .as_bytes(),
    );
    for (i, v) in mesh.vertices().iter().enumerate() {
        let part = labels[i];
        let color = PALETTE[(part.max(1) - 1) % PALETTE.len()];
        match encoding {
            PlyEncoding::Ascii => {
                out.extend_from_slice(
                    format!(
                        "{} {} {} {} {} {} {}\n",
                        v.x, v.y, v.z, part, color[0], color[1], color[2]
                    )
                    .as_bytes(),
                );
            }
            PlyEncoding::BinaryLittleEndian => {
                out.extend_from_slice(&v.x.to_le_bytes());
                out.extend_from_slice(&v.y.to_le_bytes());
                out.extend_from_slice(&v.z.to_le_bytes());
                out.extend_from_slice(&(part as i32).to_le_bytes());
                out.extend_from_slice(&color);
            }
        }
    }
    for f in mesh.faces() {
        match encoding {
            PlyEncoding::Ascii => {
                out.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes())
            }
            PlyEncoding::BinaryLittleEndian => {
                out.push(3u8);
                for &v in f {
                    out.extend_from_slice(&(v as i32).to_le_bytes());
                }
            }
        }
    }
    write_all(path, &out)
}
