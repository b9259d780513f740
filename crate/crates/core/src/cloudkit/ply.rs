//! PLY reader and writer for point clouds.
//!
//! Reads `ascii` and `binary_little_endian` files whose `vertex` element has
//! `float`/`double` `x`, `y`, `z` and optionally `red`, `green`, `blue`
//! (integer channels are scaled by 255, float channels taken as-is). Other
//! elements and properties are parsed and skipped. Coordinates are meters in a
//! right-handed, z-up frame.

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Point3;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
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
            other => return Err(Error::Ply(format!("unknown property type `{other}`"))),
        })
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn max_value(self) -> f64 {
        match self {
            Scalar::I8 => i8::MAX as f64,
            Scalar::U8 => u8::MAX as f64,
            Scalar::I16 => i16::MAX as f64,
            Scalar::U16 => u16::MAX as f64,
            Scalar::I32 => i32::MAX as f64,
            Scalar::U32 => u32::MAX as f64,
            Scalar::F32 | Scalar::F64 => 1.0,
        }
    }

    fn read_binary(self, cur: &mut Cursor<&[u8]>) -> std::io::Result<f64> {
        Ok(match self {
            Scalar::I8 => cur.read_i8()? as f64,
            Scalar::U8 => cur.read_u8()? as f64,
            Scalar::I16 => cur.read_i16::<LittleEndian>()? as f64,
            Scalar::U16 => cur.read_u16::<LittleEndian>()? as f64,
            Scalar::I32 => cur.read_i32::<LittleEndian>()? as f64,
            Scalar::U32 => cur.read_u32::<LittleEndian>()? as f64,
            Scalar::F32 => cur.read_f32::<LittleEndian>()? as f64,
            Scalar::F64 => cur.read_f64::<LittleEndian>()?,
        })
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header";
    let pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Ply("missing end_header".into()))?;
    let mut body_offset = pos + END.len();
    if bytes.get(body_offset) == Some(&b'\r') {
        body_offset += 1;
    }
    if bytes.get(body_offset) == Some(&b'\n') {
        body_offset += 1;
    }
    let text = std::str::from_utf8(&bytes[..pos])
        .map_err(|_| Error::Ply("header is not valid text".into()))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(Error::Ply("missing `ply` magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(Error::Ply(format!("unsupported encoding `{other}`"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Ply(format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .props
                .push(Property::List {
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .props
                .push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                }),
            _ => return Err(Error::Ply(format!("unrecognized header line `{line}`"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::Ply("missing format line".into()))?,
        elements,
        body_offset,
    })
}

struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<([usize; 3], Scalar)>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let find = |want: &str| -> Option<(usize, Scalar)> {
        el.props.iter().enumerate().find_map(|(i, p)| match p {
            Property::Scalar { name, ty } if name == want => Some((i, *ty)),
            _ => None,
        })
    };
    let mut xyz = [0; 3];
    for (slot, name) in xyz.iter_mut().zip(["x", "y", "z"]) {
        let (i, ty) = find(name).ok_or_else(|| Error::Ply(format!("vertex lacks `{name}`")))?;
        if !ty.is_float() {
            return Err(Error::Ply(format!(
                "coordinate `{name}` must be float or double"
            )));
        }
        *slot = i;
    }
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => {
            if r.1 != g.1 || g.1 != b.1 {
                return Err(Error::Ply("color channels differ in type".into()));
            }
            Some(([r.0, g.0, b.0], r.1))
        }
        (None, None, None) => None,
        _ => return Err(Error::Ply("partial color channels".into())),
    };
    Ok(VertexLayout { xyz, rgb })
}

/// Parses a PLY document into a validated cloud.
pub fn read<T: Real>(bytes: &[u8]) -> Result<PointCloud<T>> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let mut points = Vec::new();
    let mut colors: Option<Vec<[f32; 3]>> = None;
    let mut seen_vertex = false;

    let mut ascii_tokens = match header.format {
        PlyFormat::Ascii => Some(
            std::str::from_utf8(body)
                .map_err(|_| Error::Ply("ascii body is not valid text".into()))?
                .split_ascii_whitespace(),
        ),
        PlyFormat::BinaryLittleEndian => None,
    };
    let mut cur = Cursor::new(body);
    let truncated = |_| Error::Ply("unexpected end of data".into());

    for el in &header.elements {
        let layout = if el.name == "vertex" {
            if seen_vertex {
                return Err(Error::Ply("duplicate vertex element".into()));
            }
            seen_vertex = true;
            let l = vertex_layout(el)?;
            points.reserve(el.count);
            if l.rgb.is_some() {
                colors = Some(Vec::with_capacity(el.count));
            }
            Some(l)
        } else {
            None
        };
        let mut row = vec![0f64; el.props.len()];
        for _ in 0..el.count {
            for (slot, prop) in row.iter_mut().zip(&el.props) {
                let mut read_one = |ty: Scalar| -> Result<f64> {
                    match ascii_tokens.as_mut() {
                        Some(tokens) => {
                            let t = tokens
                                .next()
                                .ok_or_else(|| Error::Ply("unexpected end of data".into()))?;
                            t.parse::<f64>()
                                .map_err(|_| Error::Ply(format!("bad number `{t}`")))
                        }
                        None => ty.read_binary(&mut cur).map_err(truncated),
                    }
                };
                match prop {
                    Property::Scalar { ty, .. } => *slot = read_one(*ty)?,
                    Property::List { count, item } => {
                        let n = read_one(*count)?;
                        for _ in 0..(n as usize) {
                            read_one(*item)?;
                        }
                    }
                }
            }
            if let Some(l) = &layout {
                points.push(Point3::new(
                    T::lit(row[l.xyz[0]]),
                    T::lit(row[l.xyz[1]]),
                    T::lit(row[l.xyz[2]]),
                ));
                if let (Some((idx, ty)), Some(c)) = (l.rgb, colors.as_mut()) {
                    let max = ty.max_value();
                    c.push(idx.map(|i| (row[i] / max).clamp(0.0, 1.0) as f32));
                }
            }
        }
    }
    if !seen_vertex {
        return Err(Error::Ply("no vertex element".into()));
    }
    let cloud = PointCloud { points, colors };
    cloud.validate()?;
    Ok(cloud)
}

/// Serializes a cloud with `double` coordinates and `uchar` colors.
pub fn write<T: Real>(cloud: &PointCloud<T>, format: PlyFormat) -> Vec<u8> {
    encode(cloud, format, false)
}

/// Binary little-endian with `float` colors, so reading it back gives the
/// same cloud bit for bit (for f64 clouds).
pub fn write_exact<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    encode(cloud, PlyFormat::BinaryLittleEndian, true)
}

fn encode<T: Real>(cloud: &PointCloud<T>, format: PlyFormat, float_colors: bool) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = write!(
        out,
        "ply\nformat {fmt} 1.0\ncomment units meters, right-handed, z-up\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if cloud.colors.is_some() {
        let ty = if float_colors { "float" } else { "uchar" };
        let _ = write!(out, "property {ty} red\nproperty {ty} green\nproperty {ty} blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    for (i, p) in cloud.points.iter().enumerate() {
        let xyz = [p.x.as_f64(), p.y.as_f64(), p.z.as_f64()];
        if float_colors {
            for v in xyz {
                let _ = out.write_f64::<LittleEndian>(v);
            }
            for c in cloud.colors.iter().flat_map(|c| c[i]) {
                let _ = out.write_f32::<LittleEndian>(c);
            }
            continue;
        }
        let rgb = cloud.colors.as_ref().map(|c| c[i].map(to_u8));
        match format {
            PlyFormat::Ascii => {
                let _ = write!(out, "{} {} {}", xyz[0], xyz[1], xyz[2]);
                if let Some(c) = rgb {
                    let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
                }
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for v in xyz {
                    let _ = out.write_f64::<LittleEndian>(v);
                }
                if let Some(c) = rgb {
                    out.extend_from_slice(&c);
                }
            }
        }
    }
    out
}

pub fn read_file<T: Real>(path: impl AsRef<std::path::Path>) -> Result<PointCloud<T>> {
    let mut buf = Vec::new();
    std::fs::File::open(path.as_ref())
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read(&buf)
}

pub fn write_file<T: Real>(
    path: impl AsRef<std::path::Path>,
    cloud: &PointCloud<T>,
    format: PlyFormat,
) -> Result<()> {
    std::fs::write(path.as_ref(), write(cloud, format))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}
