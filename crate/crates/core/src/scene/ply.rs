//! Reader and writer for the reference 3DGS PLY checkpoint layout.
//!
//! Vertex properties: `x y z`, `f_dc_0..2`, `f_rest_*` (channel-major),
//! `opacity` (logit), `scale_0..2` (log), `rot_0..3` (`w x y z`, unnormalized).
//! Only `binary_little_endian` is accepted. Extra scalar properties are ignored.

use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Gaussian, Scene, ShCoeffs, MAX_SH_DEGREE, SH_COEFFS};
use crate::error::{Error, Result};

/// Sigmoid bounds used when writing opacity logits: `[2^-20, 1 - 2^-20]`,
/// i.e. logits within about `±13.86`.
pub const OPACITY_EPS: f64 = 1.0 / (1u32 << 20) as f64;

const SH_DEGREE_COMMENT: &str = "sh_degree";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarType)>,
    has_list: bool,
}

impl Element {
    fn stride(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }
}

struct Header {
    elements: Vec<Element>,
    sh_degree_hint: Option<usize>,
    payload_offset: usize,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header";
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(format_err("PLY header is not terminated by end_header"));
        };
        let line = &rest[..nl];
        offset += nl + 1;
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line == END {
            break;
        }
        let text = std::str::from_utf8(line).map_err(|_| format_err("PLY header is not ASCII"))?;
        lines.push(text);
        if lines.len() > 100_000 {
            return Err(format_err("PLY header too long"));
        }
    }

    let mut iter = lines.into_iter();
    if iter.next().map(str::trim) != Some("ply") {
        return Err(format_err("missing 'ply' magic"));
    }
    let mut format_seen = false;
    let mut elements: Vec<Element> = Vec::new();
    let mut sh_degree_hint = None;
    for line in iter {
        let mut tok = line.split_whitespace();
        match tok.next() {
            None => continue,
            Some("format") => {
                let kind = tok.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(format_err(format!("unsupported PLY format '{kind}', expected binary_little_endian")));
                }
                format_seen = true;
            }
            Some("comment") => {
                if tok.next() == Some(SH_DEGREE_COMMENT) {
                    sh_degree_hint = tok.next().and_then(|d| d.parse().ok()).filter(|&d| d <= MAX_SH_DEGREE);
                }
            }
            Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| format_err("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| format_err(format!("element '{name}' has no valid count")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new(), has_list: false });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| format_err("property before any element"))?;
                let ty = tok.next().ok_or_else(|| format_err("property without type"))?;
                if ty == "list" {
                    element.has_list = true;
                    continue;
                }
                let ty = ScalarType::parse(ty).ok_or_else(|| format_err(format!("unknown property type '{ty}'")))?;
                let name = tok.next().ok_or_else(|| format_err("property without name"))?;
                element.properties.push((name.to_string(), ty));
            }
            Some(other) => return Err(format_err(format!("unexpected header keyword '{other}'"))),
        }
    }
    if !format_seen {
        return Err(format_err("missing format line"));
    }
    Ok(Header { elements, sh_degree_hint, payload_offset: offset })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Largest f32 strictly below one.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

pub(crate) fn decode_opacity(stored: f32) -> f32 {
    (sigmoid(stored as f64) as f32).clamp(f32::MIN_POSITIVE, BELOW_ONE)
}

pub(crate) fn decode_scale(stored: f32) -> f32 {
    (stored as f64).exp() as f32
}

/// Picks a stored f32 near `initial` that decodes back to `target` exactly,
/// if one exists within a few ulps.
fn encode_exact(target: f32, initial: f32, decode: impl Fn(f32) -> f32) -> f32 {
    if decode(initial) == target {
        return initial;
    }
    let mut lo = initial;
    let mut hi = initial;
    for _ in 0..8 {
        lo = lo.next_down();
        hi = hi.next_up();
        if decode(lo) == target {
            return lo;
        }
        if decode(hi) == target {
            return hi;
        }
    }
    initial
}

pub(crate) fn encode_opacity(opacity: f32) -> f32 {
    let p = (opacity as f64).clamp(OPACITY_EPS, 1.0 - OPACITY_EPS);
    let logit = (p / (1.0 - p)).ln() as f32;
    if p == opacity as f64 {
        encode_exact(opacity, logit, decode_opacity)
    } else {
        logit
    }
}

pub(crate) fn encode_scale(scale: f32) -> f32 {
    encode_exact(scale, (scale as f64).ln() as f32, decode_scale)
}

fn decode_rotation(q: [f64; 4]) -> Option<[f32; 4]> {
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 1e-12) || !norm.is_finite() {
        return None;
    }
    if (norm - 1.0).abs() <= 1e-6 {
        return Some(q.map(|v| v as f32));
    }
    Some(q.map(|v| (v / norm) as f32))
}

fn sh_rest_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1) - 1
}

/// Parses a checkpoint from memory.
pub fn read_scene_ply(bytes: &[u8]) -> Result<Scene> {
    let header = parse_header(bytes)?;
    let mut offset = header.payload_offset;
    let mut vertex = None;
    for element in &header.elements {
        if element.name == "vertex" {
            vertex = Some(element);
            break;
        }
        if element.has_list {
            return Err(format_err(format!("list properties in element '{}' are not supported", element.name)));
        }
        let size = element
            .count
            .checked_mul(element.stride())
            .ok_or_else(|| format_err("element size overflow"))?;
        offset = offset.checked_add(size).ok_or_else(|| format_err("element size overflow"))?;
    }
    let vertex = vertex.ok_or_else(|| format_err("missing element 'vertex'"))?;
    if vertex.has_list {
        return Err(format_err("list properties in element 'vertex' are not supported"));
    }

    let mut offsets = std::collections::HashMap::new();
    let mut cursor = 0;
    for (name, ty) in &vertex.properties {
        offsets.entry(name.as_str()).or_insert((cursor, *ty));
        cursor += ty.size();
    }
    let stride = cursor;
    let find = |name: &str| offsets.get(name).copied().ok_or_else(|| format_err(format!("missing property {name}")));

    let mut required = vec!["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity"];
    required.extend(["scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]);
    let fields = required.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let rest_present = (0..45).take_while(|i| offsets.contains_key(format!("f_rest_{i}").as_str())).count();
    let degree = (0..=MAX_SH_DEGREE)
        .rev()
        .find(|&d| 3 * sh_rest_len(d) <= rest_present)
        .unwrap_or(0);
    if 3 * sh_rest_len(degree) != rest_present {
        // a partial f_rest block names the first missing property
        return Err(format_err(format!("missing property f_rest_{rest_present}")));
    }
    let n_rest = sh_rest_len(degree);
    let rest = (0..3 * n_rest)
        .map(|i| find(&format!("f_rest_{i}")))
        .collect::<Result<Vec<_>>>()?;

    let needed = vertex
        .count
        .checked_mul(stride)
        .and_then(|n| n.checked_add(offset))
        .ok_or_else(|| format_err("vertex payload size overflow"))?;
    if bytes.len() < needed {
        return Err(format_err(format!(
            "truncated vertex payload: {} bytes, expected at least {needed}",
            bytes.len()
        )));
    }

    let mut gaussians = Vec::with_capacity(vertex.count);
    for index in 0..vertex.count {
        let row = &bytes[offset + index * stride..offset + (index + 1) * stride];
        let get = |(at, ty): (usize, ScalarType)| ty.read(&row[at..at + ty.size()]);
        let values: Vec<f64> = fields.iter().map(|&f| get(f)).collect();
        let rest_values: Vec<f64> = rest.iter().map(|&f| get(f)).collect();
        if let Some(bad) = values.iter().chain(&rest_values).position(|v| !v.is_finite()) {
            let name = if bad < required.len() {
                required[bad].to_string()
            } else {
                format!("f_rest_{}", bad - required.len())
            };
            return Err(Error::Data { index, message: format!("non-finite value in {name}") });
        }
        let mut sh: ShCoeffs = [[0.0; 3]; SH_COEFFS];
        for ch in 0..3 {
            sh[0][ch] = values[3 + ch] as f32;
            for k in 0..n_rest {
                sh[1 + k][ch] = rest_values[ch * n_rest + k] as f32;
            }
        }
        let rotation = decode_rotation([values[10], values[11], values[12], values[13]])
            .ok_or_else(|| Error::Data { index, message: "zero-length rotation quaternion".into() })?;
        let scale = [values[7], values[8], values[9]].map(|s| decode_scale(s as f32));
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Data { index, message: "scale out of range after exp".into() });
        }
        gaussians.push(Gaussian {
            position: [values[0] as f32, values[1] as f32, values[2] as f32],
            rotation,
            scale,
            opacity: decode_opacity(values[6] as f32),
            sh,
        });
    }
    let sh_degree = header.sh_degree_hint.map_or(degree, |hint| hint.min(degree));
    Ok(Scene { gaussians, sh_degree })
}

pub fn load_scene_ply(path: &Path) -> Result<Scene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_scene_ply(&bytes)
}

/// Writes all 45 `f_rest` values regardless of the active degree; the
/// degree travels in a `comment sh_degree N` header line.
pub fn write_scene_ply<W: Write>(scene: &Scene, out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "comment {SH_DEGREE_COMMENT} {}", scene.sh_degree)?;
    writeln!(w, "element vertex {}", scene.gaussians.len())?;
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..45 {
        writeln!(w, "property float f_rest_{i}")?;
    }
    writeln!(w, "property float opacity")?;
    for name in ["scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;

    for g in &scene.gaussians {
        let mut row: Vec<f32> = Vec::with_capacity(62);
        row.extend_from_slice(&g.position);
        row.extend_from_slice(&[0.0; 3]);
        row.extend_from_slice(&g.sh[0]);
        for ch in 0..3 {
            row.extend((1..SH_COEFFS).map(|k| g.sh[k][ch]));
        }
        row.push(encode_opacity(g.opacity));
        row.extend(g.scale.map(encode_scale));
        row.extend_from_slice(&g.rotation);
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_scene_ply(scene: &Scene, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_scene_ply(scene, file).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a PLY with the given float property names and one row of values.
    fn handcrafted(names: &[String], rows: &[Vec<f32>]) -> Vec<u8> {
        let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", rows.len());
        for n in names {
            out.push_str(&format!("property float {n}\n"));
        }
        out.push_str("end_header\n");
        let mut bytes = out.into_bytes();
        for row in rows {
            for v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    fn standard_names() -> Vec<String> {
        let mut names: Vec<String> = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"].map(String::from).to_vec();
        names.extend((0..45).map(|i| format!("f_rest_{i}")));
        names.extend(["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"].map(String::from));
        names
    }

    #[test]
    fn zero_log_scale_and_logit() {
        let names = standard_names();
        let mut row = vec![0.0f32; names.len()];
        row[names.len() - 4] = 2.0; // rot_0, unnormalized
        let scene = read_scene_ply(&handcrafted(&names, &[row])).unwrap();
        let g = &scene.gaussians[0];
        assert_eq!(g.scale, [1.0, 1.0, 1.0]);
        assert_eq!(g.opacity, 0.5);
        assert_eq!(g.rotation, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(scene.sh_degree, 3);
    }

    #[test]
    fn channel_major_rest_layout() {
        let names = standard_names();
        let mut row = vec![0.0f32; names.len()];
        row[names.len() - 4] = 1.0;
        for i in 0..45 {
            row[6 + i] = i as f32;
        }
        let g = &read_scene_ply(&handcrafted(&names, &[row])).unwrap().gaussians[0];
        assert_eq!(g.sh[1], [0.0, 15.0, 30.0]);
        assert_eq!(g.sh[15], [14.0, 29.0, 44.0]);
    }

    #[test]
    fn missing_rot_3_is_named() {
        let names: Vec<String> = standard_names().into_iter().filter(|n| n != "rot_3").collect();
        let mut row = vec![0.0f32; names.len()];
        row[names.len() - 3] = 1.0;
        let err = read_scene_ply(&handcrafted(&names, &[row])).unwrap_err();
        assert!(matches!(&err, Error::Format(m) if m.contains("rot_3")), "{err}");
    }

    #[test]
    fn non_finite_reports_vertex() {
        let names = standard_names();
        let mut ok = vec![0.0f32; names.len()];
        ok[names.len() - 4] = 1.0;
        let mut bad = ok.clone();
        bad[1] = f32::NAN;
        let err = read_scene_ply(&handcrafted(&names, &[ok, bad])).unwrap_err();
        assert!(matches!(err, Error::Data { index: 1, .. }), "{err}");
    }

    #[test]
    fn ascii_is_rejected() {
        let err = read_scene_ply(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let names = standard_names();
        let mut bytes = handcrafted(&names, &[vec![0.0; names.len()]]);
        bytes.truncate(bytes.len() - 1);
        assert!(read_scene_ply(&bytes).is_err());
    }

    #[test]
    fn empty_scene_roundtrip() {
        let mut buf = Vec::new();
        write_scene_ply(&Scene::new(vec![]), &mut buf).unwrap();
        let scene = read_scene_ply(&buf).unwrap();
        assert!(scene.is_empty());
    }

    #[test]
    fn saturated_opacity_reloads_within_tolerance() {
        let mut g = super::super::synthetic::default_gaussian();
        g.opacity = 1.0;
        let mut buf = Vec::new();
        write_scene_ply(&Scene::new(vec![g]), &mut buf).unwrap();
        let back = read_scene_ply(&buf).unwrap();
        let reloaded = back.gaussians[0].opacity;
        assert!(reloaded < 1.0);
        assert!((1.0 - reloaded as f64) < 1e-6, "{reloaded}");
    }

    #[test]
    fn degree_one_checkpoint() {
        let mut names: Vec<String> = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"].map(String::from).to_vec();
        names.extend((0..9).map(|i| format!("f_rest_{i}")));
        names.extend(["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"].map(String::from));
        let mut row = vec![0.0f32; names.len()];
        row[names.len() - 4] = 1.0;
        row[6 + 3] = 7.0; // green, first rest coefficient
        let scene = read_scene_ply(&handcrafted(&names, &[row])).unwrap();
        assert_eq!(scene.sh_degree, 1);
        assert_eq!(scene.gaussians[0].sh[1], [0.0, 7.0, 0.0]);
    }
}
