//! Binary little-endian PLY in the layout written by 3DGS trainers.
//!
//! Vertex properties, all `float`, in this order on write:
//! `x y z nx ny nz f_dc_0..2 f_rest_0..K-1 opacity scale_0..2 rot_0..3`,
//! with `K ∈ {0, 9, 24, 45}` selecting the SH degree and `rot_0` the scalar
//! quaternion part. On read, properties may come in any order and extra
//! properties are skipped by their declared width.

use std::io::Write;

use super::cloud::{sh_degree_for_len, sh_rest_len, GaussianSplat, SplatCloud};
use super::math::{Quat, Vec3};
use super::PlyError;

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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn width(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f32 {
        match self {
            Self::I8 => b[0] as i8 as f32,
            Self::U8 => b[0] as f32,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f32,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()) as f32,
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    stride: usize,
    has_list: bool,
}

struct Header {
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    if !bytes.starts_with(b"ply") || !matches!(bytes.get(3), Some(b'\n') | Some(b'\r')) {
        return Err(PlyError::BadMagic);
    }
    let end = find(bytes, b"end_header").ok_or_else(|| PlyError::MalformedHeader("missing end_header".into()))?;
    let mut body_offset = end + b"end_header".len();
    match bytes.get(body_offset) {
        Some(b'\r') if bytes.get(body_offset + 1) == Some(&b'\n') => body_offset += 2,
        Some(b'\n') => body_offset += 1,
        _ => return Err(PlyError::MalformedHeader("end_header must end its line".into())),
    }
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| PlyError::MalformedHeader("header is not ASCII".into()))?;

    let mut format_seen = false;
    let mut elements: Vec<Element> = Vec::new();
    for line in text.lines().skip(1) {
        let line = line.trim_end_matches('\r').trim();
        let mut words = line.split_whitespace();
        match words.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                let fmt = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(PlyError::UnsupportedFormat(fmt.to_string()));
                }
                if version != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("{fmt} {version}")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = words.next().ok_or_else(|| PlyError::MalformedHeader(line.into()))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| PlyError::MalformedHeader(line.into()))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::MalformedHeader("property before element".into()))?;
                let ty = words.next().unwrap_or("");
                if ty == "list" {
                    el.has_list = true;
                    continue;
                }
                let ty = ScalarType::parse(ty).ok_or_else(|| PlyError::MalformedHeader(line.into()))?;
                let name = words.next().ok_or_else(|| PlyError::MalformedHeader(line.into()))?;
                el.properties.push(Property {
                    name: name.to_string(),
                    ty,
                    offset: el.stride,
                });
                el.stride += ty.width();
            }
            Some(other) => return Err(PlyError::MalformedHeader(format!("unknown keyword {other}"))),
        }
    }
    if !format_seen {
        return Err(PlyError::MalformedHeader("missing format line".into()));
    }
    Ok(Header { elements, body_offset })
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Parses a binary little-endian 3DGS PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<SplatCloud, PlyError> {
    let header = parse_header(bytes)?;
    let mut offset = header.body_offset;
    let mut vertex = None;
    for el in &header.elements {
        if el.name == "vertex" {
            vertex = Some(el);
            break;
        }
        if el.has_list {
            return Err(PlyError::UnsupportedFormat(format!(
                "list properties in element '{}' before vertex data",
                el.name
            )));
        }
        offset += el.count * el.stride;
    }
    let vertex = vertex.ok_or_else(|| PlyError::MissingField("vertex element".into()))?;
    if vertex.has_list {
        return Err(PlyError::UnsupportedFormat("list property in vertex element".into()));
    }

    let prop = |name: &str| vertex.properties.iter().find(|p| p.name == name);
    let required = |name: &str| prop(name).ok_or_else(|| PlyError::MissingField(name.to_string()));
    let pos = [required("x")?, required("y")?, required("z")?];
    let rot = [required("rot_0")?, required("rot_1")?, required("rot_2")?, required("rot_3")?];
    let scale = [required("scale_0")?, required("scale_1")?, required("scale_2")?];
    let opacity = required("opacity")?;
    let dc = [prop("f_dc_0"), prop("f_dc_1"), prop("f_dc_2")];

    let rest_count = vertex.properties.iter().filter(|p| p.name.starts_with("f_rest_")).count();
    let mut rest = Vec::with_capacity(rest_count);
    for i in 0..rest_count {
        rest.push(required(&format!("f_rest_{i}"))?);
    }
    let sh_degree = sh_degree_for_len(rest_count).ok_or(PlyError::BadShCount(rest_count))?;

    let needed = vertex.count.checked_mul(vertex.stride).ok_or(PlyError::Truncated {
        expected: usize::MAX,
        actual: bytes.len(),
    })?;
    let body = bytes.get(offset..).unwrap_or(&[]);
    if body.len() < needed {
        return Err(PlyError::Truncated {
            expected: needed,
            actual: body.len(),
        });
    }

    let read = |record: &[u8], p: &Property| p.ty.read(&record[p.offset..]);
    let splats = body[..needed]
        .chunks_exact(vertex.stride.max(1))
        .take(vertex.count)
        .map(|r| GaussianSplat {
            position: Vec3::new(read(r, pos[0]), read(r, pos[1]), read(r, pos[2])),
            rotation: Quat::new(read(r, rot[0]), read(r, rot[1]), read(r, rot[2]), read(r, rot[3])),
            log_scale: Vec3::new(read(r, scale[0]), read(r, scale[1]), read(r, scale[2])),
            opacity_logit: read(r, opacity),
            color_dc: dc.map(|p| p.map_or(0.0, |p| read(r, p))),
            sh_rest: rest.iter().map(|p| read(r, p)).collect(),
        })
        .collect();
    Ok(SplatCloud { splats, sh_degree })
}

/// Writes `cloud` in the reference layout. Normals are written as zeros.
pub fn write_ply(cloud: &SplatCloud) -> Vec<u8> {
    let rest = sh_rest_len(cloud.sh_degree).unwrap_or(0);
    let mut out = Vec::with_capacity(512 + cloud.len() * (17 + rest) * 4);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
            .iter()
            .map(|s| s.to_string()),
    );
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());

    let mut put = |v: f32| out.write_all(&v.to_le_bytes()).expect("vec write");
    for s in &cloud.splats {
        for v in s.position.as_array() {
            put(v);
        }
        for _ in 0..3 {
            put(0.0);
        }
        for v in s.color_dc {
            put(v);
        }
        for i in 0..rest {
            put(s.sh_rest.get(i).copied().unwrap_or(0.0));
        }
        put(s.opacity_logit);
        for v in s.log_scale.as_array() {
            put(v);
        }
        for v in [s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z] {
            put(v);
        }
    }
    out
}
