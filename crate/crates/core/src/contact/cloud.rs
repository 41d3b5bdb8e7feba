use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;

use super::ContactError;
use crate::prediction::PixelPoint;

/// Magic prefix of the binary cloud format.
pub const BINARY_MAGIC: &[u8; 4] = b"PCLD";
/// Default search radius (Chebyshev, in pixels) for a missing depth cell.
pub const DEFAULT_FALLBACK_RADIUS: u32 = 10;

/// Depth data aligned 1:1 with an image. Each cell optionally holds a point
/// in the camera frame, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    width: u32,
    height: u32,
    points: Vec<Option<Vector3<f64>>>,
}

/// Result of [`PointCloud::pixel_to_camera`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPoint {
    pub point: Vector3<f64>,
    /// The cell the point was read from.
    pub source: PixelPoint,
    /// True when the requested cell was empty and a neighbor was used.
    pub substituted: bool,
}

impl PointCloud {
    pub fn new(width: u32, height: u32, points: Vec<Option<Vector3<f64>>>) -> Result<Self, ContactError> {
        if width == 0 || height == 0 {
            return Err(ContactError::CloudFormat("zero extent".into()));
        }
        if points.len() != width as usize * height as usize {
            return Err(ContactError::CloudFormat(format!(
                "{} cells for {width}x{height}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(ContactError::CloudFormat("present point with non-finite coordinate".into()));
        }
        Ok(Self { width, height, points })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![None; width as usize * height as usize]).expect("valid extent")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn get(&self, u: u32, v: u32) -> Option<Vector3<f64>> {
        self.points[self.index(u, v)]
    }

    pub fn set(&mut self, u: u32, v: u32, point: Option<Vector3<f64>>) {
        let i = self.index(u, v);
        self.points[i] = point;
    }

    pub fn present_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }

    /// Camera-frame point under `p`. An empty cell falls back to the
    /// nearest present cell within `radius` (Chebyshev). Candidates are
    /// ordered by Chebyshev distance, then squared Euclidean distance, then
    /// row, then column.
    pub fn pixel_to_camera(&self, p: PixelPoint, radius: u32) -> Result<CameraPoint, ContactError> {
        if !p.within(self.width, self.height) {
            return Err(ContactError::OutOfBounds {
                u: p.u,
                v: p.v,
                width: self.width,
                height: self.height,
            });
        }
        if let Some(point) = self.get(p.u, p.v) {
            return Ok(CameraPoint {
                point,
                source: p,
                substituted: false,
            });
        }
        // Rings of growing Chebyshev distance; the first ring with any hit wins.
        for ring in 1..=radius as i64 {
            let mut best: Option<((i64, i64, i64), PixelPoint)> = None;
            let (cu, cv) = (p.u as i64, p.v as i64);
            for dv in -ring..=ring {
                let v = cv + dv;
                if v < 0 || v >= self.height as i64 {
                    continue;
                }
                let on_edge_row = dv.abs() == ring;
                let step = if on_edge_row { 1 } else { 2 * ring };
                let mut du = -ring;
                while du <= ring {
                    let u = cu + du;
                    if u >= 0 && u < self.width as i64 && self.get(u as u32, v as u32).is_some() {
                        let key = (du * du + dv * dv, v, u);
                        if best.is_none_or(|(k, _)| key < k) {
                            best = Some((key, PixelPoint::new(u as u32, v as u32)));
                        }
                    }
                    du += step;
                }
            }
            if let Some((_, source)) = best {
                return Ok(CameraPoint {
                    point: self.get(source.u, source.v).expect("present"),
                    source,
                    substituted: true,
                });
            }
        }
        Err(ContactError::NoDepth { u: p.u, v: p.v, radius })
    }

    /// Parses either format, detected by the binary magic.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContactError> {
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|e| ContactError::CloudFormat(e.to_string()))?;
            Self::from_text(text)
        }
    }

    pub fn open(path: &std::path::Path) -> Result<Self, ContactError> {
        let bytes = std::fs::read(path).map_err(|e| ContactError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Text format: a `CLOUD <width> <height>` header, then one `x y z valid`
    /// line per cell in row-major order. Blank lines and `#` comments are
    /// skipped.
    pub fn from_text(text: &str) -> Result<Self, ContactError> {
        let bad = |line: usize, msg: &str| ContactError::CloudFormat(format!("line {line}: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (width, height) = match fields.as_slice() {
            ["CLOUD", w, h] => (
                w.parse::<u32>().map_err(|_| bad(n, "bad width"))?,
                h.parse::<u32>().map_err(|_| bad(n, "bad height"))?,
            ),
            _ => return Err(bad(n, "expected `CLOUD <width> <height>`")),
        };
        let cells = width as usize * height as usize;
        let mut points = Vec::with_capacity(cells);
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(n, "expected `x y z valid`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad coordinate"));
            let xyz = Vector3::new(num(f[0])?, num(f[1])?, num(f[2])?);
            let valid = match f[3] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(n, "valid flag must be 0 or 1")),
            };
            points.push(valid.then_some(xyz));
        }
        if points.len() != cells {
            return Err(ContactError::CloudFormat(format!(
                "{} records for {width}x{height}",
                points.len()
            )));
        }
        Self::new(width, height, points)
    }

    /// Binary format: `PCLD`, u32 LE width, u32 LE height, then per cell three
    /// f64 LE coordinates and one valid byte.
    pub fn from_binary(bytes: &[u8]) -> Result<Self, ContactError> {
        let short = |_| ContactError::CloudFormat("truncated binary cloud".into());
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(short)?;
        if &magic != BINARY_MAGIC {
            return Err(ContactError::CloudFormat("bad magic".into()));
        }
        let width = r.read_u32::<LittleEndian>().map_err(short)?;
        let height = r.read_u32::<LittleEndian>().map_err(short)?;
        let cells = width as usize * height as usize;
        let expected = 12 + cells * 25;
        if bytes.len() != expected {
            return Err(ContactError::CloudFormat(format!(
                "{} bytes, expected {expected} for {width}x{height}",
                bytes.len()
            )));
        }
        let mut points = Vec::with_capacity(cells);
        for _ in 0..cells {
            let x = r.read_f64::<LittleEndian>().map_err(short)?;
            let y = r.read_f64::<LittleEndian>().map_err(short)?;
            let z = r.read_f64::<LittleEndian>().map_err(short)?;
            let valid = r.read_u8().map_err(short)?;
            points.push((valid != 0).then_some(Vector3::new(x, y, z)));
        }
        Self::new(width, height, points)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.points.len() * 25);
        out.extend_from_slice(BINARY_MAGIC);
        out.write_u32::<LittleEndian>(self.width).unwrap();
        out.write_u32::<LittleEndian>(self.height).unwrap();
        for p in &self.points {
            let xyz = p.unwrap_or_else(Vector3::zeros);
            for c in xyz.iter() {
                out.write_f64::<LittleEndian>(*c).unwrap();
            }
            out.push(p.is_some() as u8);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("CLOUD {} {}\n", self.width, self.height);
        for p in &self.points {
            let xyz = p.unwrap_or_else(Vector3::zeros);
            out.push_str(&format!("{:?} {:?} {:?} {}\n", xyz.x, xyz.y, xyz.z, p.is_some() as u8));
        }
        out
    }
}
