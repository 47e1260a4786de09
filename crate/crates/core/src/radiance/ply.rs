//! Gaussian scenes in the binary little-endian PLY layout written by common
//! splatting trainers.
//!
//! Each vertex carries `x y z`, `f_dc_0..2`, optional `f_rest_*` (0, 9, 24 or
//! 45 values, channel-major), `opacity` as a logit, `scale_0..2` as natural
//! logs and `rot_0..3` as an unnormalised `w x y z` quaternion. Any other
//! properties (normals, for instance) are ignored.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Vector3;

use super::gaussian::GaussianScene;
use super::sh::sh_coeff_count;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
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

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
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

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
}

fn header_err(msg: impl Into<String>) -> Error {
    Error::scene(None, msg)
}

fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, usize)> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| header_err("missing end_header"))?;
    let mut body = end + END.len();
    match bytes.get(body) {
        Some(b'\n') => body += 1,
        Some(b'\r') if bytes.get(body + 1) == Some(&b'\n') => body += 2,
        _ => return Err(header_err("malformed end_header line")),
    }
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| header_err("header is not text"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(header_err("not a PLY file"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(header_err(format!("unsupported PLY format {fmt}")));
                }
                format_seen = true;
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| header_err(format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", ..] => {
                let el = elements
                    .last()
                    .ok_or_else(|| header_err("property before element"))?;
                if el.name == "vertex" {
                    return Err(header_err("list properties are not supported on vertices"));
                }
                return Err(header_err(format!("list property on element {}", el.name)));
            }
            ["property", ty, name] => {
                let ty =
                    Scalar::parse(ty).ok_or_else(|| header_err(format!("unknown type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| header_err("property before element"))?
                    .props
                    .push((name.to_string(), ty));
            }
            _ => return Err(header_err(format!("unrecognised header line {line:?}"))),
        }
    }
    if !format_seen {
        return Err(header_err("missing format line"));
    }
    Ok((elements, body))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parse a scene from the bytes of a PLY file.
pub fn read_gaussian_scene(bytes: &[u8]) -> Result<GaussianScene> {
    let (elements, mut offset) = parse_header(bytes)?;
    let mut vertex = None;
    for el in &elements {
        let size: usize = el.props.iter().map(|p| p.1.size()).sum();
        if el.name == "vertex" {
            vertex = Some((el, size));
            break;
        }
        offset = offset.saturating_add(size.saturating_mul(el.count));
    }
    let (el, stride) = vertex.ok_or_else(|| header_err("no vertex element"))?;

    let mut layout: HashMap<&str, (usize, Scalar)> = HashMap::new();
    let mut at = 0;
    for (name, ty) in &el.props {
        layout.insert(name.as_str(), (at, *ty));
        at += ty.size();
    }
    let field = |name: &str| {
        layout
            .get(name)
            .copied()
            .ok_or_else(|| header_err(format!("missing property {name}")))
    };
    let pos = [field("x")?, field("y")?, field("z")?];
    let dc = [field("f_dc_0")?, field("f_dc_1")?, field("f_dc_2")?];
    let opacity = field("opacity")?;
    let scale = [field("scale_0")?, field("scale_1")?, field("scale_2")?];
    let rot = [
        field("rot_0")?,
        field("rot_1")?,
        field("rot_2")?,
        field("rot_3")?,
    ];
    let n_rest = (0..)
        .take_while(|i| layout.contains_key(format!("f_rest_{i}").as_str()))
        .count();
    let degree = match n_rest {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        n => {
            return Err(header_err(format!(
                "{n} f_rest properties do not form an SH degree"
            )))
        }
    };
    let rest: Vec<(usize, Scalar)> = (0..n_rest)
        .map(|i| field(&format!("f_rest_{i}")))
        .collect::<Result<_>>()?;
    let per_channel = n_rest / 3;

    let n = el.count;
    let payload = bytes.len().saturating_sub(offset);
    if n.checked_mul(stride).is_none_or(|need| payload < need) {
        return Err(Error::scene(
            Some(payload / stride.max(1)),
            format!("payload truncated: {payload} bytes for {n} records of {stride}"),
        ));
    }

    let coeffs = sh_coeff_count(degree);
    let mut means = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut opacities = Vec::with_capacity(n);
    let mut sh = Vec::with_capacity(n * coeffs);
    for i in 0..n {
        let rec = &bytes[offset + i * stride..offset + (i + 1) * stride];
        let get = |(at, ty): (usize, Scalar)| -> Result<f64> {
            let v = ty.read(&rec[at..]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::scene(Some(i), "non-finite value"))
            }
        };
        means.push(Vector3::new(get(pos[0])?, get(pos[1])?, get(pos[2])?));
        scales.push(Vector3::new(
            get(scale[0])?.exp(),
            get(scale[1])?.exp(),
            get(scale[2])?.exp(),
        ));
        opacities.push(sigmoid(get(opacity)?));
        let q = [get(rot[0])?, get(rot[1])?, get(rot[2])?, get(rot[3])?];
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::scene(Some(i), "zero rotation quaternion"));
        }
        rotations.push(q.map(|v| v / norm));
        sh.push([get(dc[0])? as f32, get(dc[1])? as f32, get(dc[2])? as f32]);
        for j in 0..coeffs - 1 {
            let mut c = [0f32; 3];
            for (ch, v) in c.iter_mut().enumerate() {
                *v = get(rest[ch * per_channel + j])? as f32;
            }
            sh.push(c);
        }
    }
    GaussianScene::new(means, scales, rotations, opacities, degree, sh)
}

/// Load a scene file.
pub fn load_gaussian_scene(path: impl AsRef<Path>) -> Result<GaussianScene> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    read_gaussian_scene(&bytes)
}

/// Serialise `scene` in the same layout the reader accepts.
pub fn encode_gaussian_scene(scene: &GaussianScene) -> Vec<u8> {
    let degree = scene.sh_degree();
    let n_rest = 3 * (sh_coeff_count(degree) - 1);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", scene.len());
    let mut names: Vec<String> = [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..n_rest).map(|i| format!("f_rest_{i}")));
    names.extend(
        [
            "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    for name in &names {
        header += &format!("property float {name}\n");
    }
    header += "end_header\n";

    let mut out = header.into_bytes();
    let per_channel = n_rest / 3;
    for i in 0..scene.len() {
        let mut rec: Vec<f32> = Vec::with_capacity(names.len());
        rec.extend(scene.mean(i).iter().map(|v| *v as f32));
        rec.extend([0.0; 3]);
        let sh = scene.sh(i);
        rec.extend(sh[0]);
        for ch in 0..3 {
            rec.extend((0..per_channel).map(|j| sh[j + 1][ch]));
        }
        let o = scene.opacity(i).clamp(1e-7, 1.0 - 1e-7);
        rec.push((o / (1.0 - o)).ln() as f32);
        rec.extend(scene.scale(i).iter().map(|s| s.ln() as f32));
        let q = scene.rotation(i);
        rec.extend([q.w, q.i, q.j, q.k].map(|v| v as f32));
        for v in rec {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Write `scene` to `path` atomically.
pub fn write_gaussian_scene(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<()> {
    crate::image::write_atomic(path.as_ref(), &encode_gaussian_scene(scene))
}
