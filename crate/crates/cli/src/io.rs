//! File formats: PFM floats, 16-bit PNG depth and labels, JSON records.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use videpth::{
    CameraIntrinsics, ColorImage, DepthImage, GravityVector, Image, NormalMap, PlaneMaskSet,
    Plane, Point3, SparseDepth, Vector3,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("png: {0}")]
    Png(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported file type: {0}")]
    UnsupportedFormat(PathBuf),
    #[error(transparent)]
    Core(#[from] videpth::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn parse_err(offset: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        offset,
        message: message.into(),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.to_owned(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

/// Raw PFM contents, rows stored top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    /// 1 for `Pf`, 3 for `PF`.
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Pfm {
    /// Compares sample bits, so NaN payloads count as equal only if identical.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn token(&mut self, what: &str) -> Result<(usize, &str)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("truncated header, expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| parse_err(start, format!("non-ASCII {what}")))?;
        Ok((start, text))
    }

    /// Consumes the single whitespace byte that ends the header.
    fn end_of_header(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(parse_err(self.pos, "truncated header, expected whitespace after scale")),
        }
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Pfm> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let (at, magic) = cur.token("magic")?;
    let channels = match magic {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(parse_err(at, format!("bad magic {other:?}"))),
    };
    let mut dim = |what: &str| -> Result<usize> {
        let (at, t) = cur.token(what)?;
        match t.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(parse_err(at, format!("bad {what} {t:?}"))),
        }
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let (at, scale_text) = cur.token("scale")?;
    let scale: f32 = scale_text
        .parse()
        .map_err(|_| parse_err(at, format!("bad scale {scale_text:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(parse_err(at, "scale must be finite and nonzero"));
    }
    cur.end_of_header()?;
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let body = &bytes[cur.pos..];
    if body.len() < count * 4 {
        return Err(parse_err(
            cur.pos + body.len(),
            format!("truncated data, expected {} bytes after header", count * 4),
        ));
    }
    let mut data = vec![0f32; count];
    let row = width * channels;
    for (i, chunk) in body[..count * 4].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        // file rows run bottom to top
        let (file_row, col) = (i / row, i % row);
        data[(height - 1 - file_row) * row + col] = value;
    }
    Ok(Pfm {
        width,
        height,
        channels,
        data,
    })
}

/// Little-endian PFM.
pub fn encode_pfm(pfm: &Pfm) -> Vec<u8> {
    let magic = if pfm.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", pfm.width, pfm.height).into_bytes();
    out.reserve(pfm.data.len() * 4);
    let row = pfm.width * pfm.channels;
    for r in (0..pfm.height).rev() {
        for v in &pfm.data[r * row..(r + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: &Path) -> Result<Pfm> {
    decode_pfm(&read_bytes(path)?)
}

pub fn write_pfm(path: &Path, pfm: &Pfm) -> Result<()> {
    write_bytes(path, &encode_pfm(pfm))
}

fn expect_channels(pfm: &Pfm, channels: usize) -> Result<()> {
    if pfm.channels != channels {
        return Err(videpth::Error::DimensionMismatch(format!(
            "expected {channels}-channel PFM, found {}",
            pfm.channels
        ))
        .into());
    }
    Ok(())
}

pub fn depth_from_pfm(pfm: &Pfm) -> Result<DepthImage> {
    expect_channels(pfm, 1)?;
    Ok(DepthImage::from_vec(
        pfm.width,
        pfm.height,
        pfm.data.iter().map(|&v| f64::from(v)).collect(),
    )?)
}

pub fn depth_to_pfm(depth: &DepthImage) -> Pfm {
    Pfm {
        width: depth.width(),
        height: depth.height(),
        channels: 1,
        data: depth.data().iter().map(|&v| v as f32).collect(),
    }
}

/// Nonzero finite vectors are renormalized to undo f32 rounding; anything
/// else becomes the invalid zero normal.
pub fn normals_from_pfm(pfm: &Pfm) -> Result<NormalMap> {
    expect_channels(pfm, 3)?;
    let data = pfm
        .data
        .chunks_exact(3)
        .map(|c| {
            let v = Vector3::new(f64::from(c[0]), f64::from(c[1]), f64::from(c[2]));
            let n = v.norm();
            if n.is_finite() && n > 0.0 {
                v / n
            } else {
                Vector3::zeros()
            }
        })
        .collect();
    Ok(NormalMap::from_vec(pfm.width, pfm.height, data)?)
}

pub fn normals_to_pfm(normals: &NormalMap) -> Pfm {
    Pfm {
        width: normals.width(),
        height: normals.height(),
        channels: 3,
        data: normals
            .data()
            .iter()
            .flat_map(|n| [n.x as f32, n.y as f32, n.z as f32])
            .collect(),
    }
}

pub fn color_to_pfm(img: &ColorImage) -> Pfm {
    Pfm {
        width: img.width(),
        height: img.height(),
        channels: 3,
        data: img.data().iter().flat_map(|c| c.map(|x| x as f32)).collect(),
    }
}

pub fn color_from_pfm(pfm: &Pfm) -> Result<ColorImage> {
    expect_channels(pfm, 3)?;
    let data = pfm
        .data
        .chunks_exact(3)
        .map(|c| [f64::from(c[0]), f64::from(c[1]), f64::from(c[2])])
        .collect();
    Ok(ColorImage::from_vec(pfm.width, pfm.height, data)?)
}

/// Reads a single-channel float image such as a grayscale texture.
pub fn read_gray(path: &Path) -> Result<Image<f64>> {
    depth_from_pfm(&read_pfm(path)?)
}

pub fn decode_png16(bytes: &[u8]) -> Result<Image<u16>> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| IoError::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| IoError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(IoError::Png(format!("expected grayscale, found {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data: Vec<u16> = match info.bit_depth {
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
        png::BitDepth::Eight => buf[..info.buffer_size()].iter().map(|&b| u16::from(b)).collect(),
        other => return Err(IoError::Png(format!("unsupported bit depth {other:?}"))),
    };
    Ok(Image::from_vec(w, h, data)?)
}

pub fn encode_png16(img: &Image<u16>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| IoError::Png(e.to_string()))?;
        let bytes: Vec<u8> = img.data().iter().flat_map(|v| v.to_be_bytes()).collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| IoError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Millimeters to meters; 0 becomes NaN.
pub fn depth_from_mm(img: &Image<u16>) -> DepthImage {
    img.map(|&mm| if mm == 0 { f64::NAN } else { f64::from(mm) / 1000.0 })
}

/// Meters to rounded millimeters; invalid depth becomes 0.
pub fn depth_to_mm(depth: &DepthImage) -> Result<Image<u16>> {
    let max = f64::from(u16::MAX) / 1000.0;
    for (p, &z) in depth.iter_pixels() {
        if z.is_finite() && (z <= 0.0 || z > max) {
            return Err(videpth::Error::InvalidDepth {
                u: p.u,
                v: p.v,
                value: z,
            }
            .into());
        }
    }
    Ok(depth.map(|&z| if z.is_finite() { (z * 1000.0).round() as u16 } else { 0 }))
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    match extension(path).as_str() {
        "pfm" => depth_from_pfm(&read_pfm(path)?),
        "png" => Ok(depth_from_mm(&decode_png16(&read_bytes(path)?)?)),
        _ => Err(IoError::UnsupportedFormat(path.to_owned())),
    }
}

pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    match extension(path).as_str() {
        "pfm" => write_pfm(path, &depth_to_pfm(depth)),
        "png" => write_bytes(path, &encode_png16(&depth_to_mm(depth)?)?),
        _ => Err(IoError::UnsupportedFormat(path.to_owned())),
    }
}

pub fn read_normals(path: &Path) -> Result<NormalMap> {
    normals_from_pfm(&read_pfm(path)?)
}

pub fn write_normals(path: &Path, normals: &NormalMap) -> Result<()> {
    write_pfm(path, &normals_to_pfm(normals))
}

pub fn read_masks(path: &Path) -> Result<PlaneMaskSet> {
    decode_png16(&read_bytes(path)?)
}

pub fn write_masks(path: &Path, masks: &PlaneMaskSet) -> Result<()> {
    write_bytes(path, &encode_png16(masks)?)
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json(value)?)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseRecord {
    pub u: i64,
    pub v: i64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub n: [f64; 3],
    pub d: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn sparse_to_records(sd: &SparseDepth) -> Vec<SparseRecord> {
    sd.entries()
        .iter()
        .map(|(p, z)| SparseRecord {
            u: p.u as i64,
            v: p.v as i64,
            z: *z,
        })
        .collect()
}

pub fn encode_sparse(sd: &SparseDepth) -> Result<Vec<u8>> {
    to_json(&sparse_to_records(sd))
}

/// The sparse JSON carries no size, so the image dimensions come from the caller.
pub fn read_sparse(path: &Path, k: &CameraIntrinsics) -> Result<SparseDepth> {
    let records: Vec<SparseRecord> = read_json(path)?;
    Ok(SparseDepth::new(
        k.width,
        k.height,
        records.iter().map(|r| (r.u, r.v, r.z)),
    )?)
}

pub fn write_sparse(path: &Path, sd: &SparseDepth) -> Result<()> {
    write_bytes(path, &encode_sparse(sd)?)
}

pub fn read_planes(path: &Path) -> Result<Vec<Plane>> {
    let records: Vec<PlaneRecord> = read_json(path)?;
    records
        .iter()
        .map(|r| {
            Plane::new(Vector3::from(r.n), r.d).ok_or_else(|| {
                videpth::Error::InvalidConfig(format!("degenerate plane normal {:?}", r.n)).into()
            })
        })
        .collect()
}

pub fn write_planes(path: &Path, planes: &[Plane]) -> Result<()> {
    let records: Vec<PlaneRecord> = planes
        .iter()
        .map(|p| PlaneRecord {
            n: [p.normal.x, p.normal.y, p.normal.z],
            d: p.d,
        })
        .collect();
    write_json(path, &records)
}

pub fn read_gravity(path: &Path) -> Result<GravityVector> {
    let g: [f64; 3] = read_json(path)?;
    Ok(GravityVector::new(Vector3::from(g))?)
}

pub fn write_gravity(path: &Path, g: &GravityVector) -> Result<()> {
    let v = g.as_vector();
    write_json(path, &[v.x, v.y, v.z])
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = read_json(path)?;
    k.validate()?;
    Ok(k)
}

pub fn read_points(path: &Path) -> Result<Vec<Point3<f64>>> {
    let records: Vec<PointRecord> = read_json(path)?;
    Ok(records.iter().map(|r| Point3::new(r.x, r.y, r.z)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_rows_are_flipped_on_disk() {
        let pfm = Pfm {
            width: 1,
            height: 2,
            channels: 1,
            data: vec![1.0, 2.0],
        };
        let bytes = encode_pfm(&pfm);
        let header = b"Pf\n1 2\n-1.0\n".len();
        assert_eq!(&bytes[header..header + 4], &2.0f32.to_le_bytes());
        assert!(decode_pfm(&bytes).unwrap().bitwise_eq(&pfm));
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-3.0f32).to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().data, vec![1.5, -3.0]);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        match decode_pfm(b"P6\n1 1\n255\n") {
            Err(IoError::Parse { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mm_conversion_rejects_out_of_range() {
        let d = DepthImage::from_vec(2, 1, vec![70.0, 1.0]).unwrap();
        assert!(depth_to_mm(&d).is_err());
    }
}
