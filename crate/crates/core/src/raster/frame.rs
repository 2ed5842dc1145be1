use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Marker for "no contributing splat" in [`FrameBuffer::top`].
pub const NO_SPLAT: u32 = u32::MAX;

/// Render target. All planes are row-major, `width * height` long.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    /// Accumulated opacity `Σ T_i w_i`.
    pub alpha: Vec<f64>,
    /// Opacity-weighted camera depth `Σ T_i w_i z_i`.
    pub depth: Vec<f64>,
    /// Splat with the largest weight at each pixel.
    pub top: Vec<u32>,
    pub top_weight: Vec<f64>,
    /// Number of splats composited at each pixel.
    pub contributors: Vec<u32>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            color: vec![[0.0; 3]; n],
            alpha: vec![0.0; n],
            depth: vec![0.0; n],
            top: vec![NO_SPLAT; n],
            top_weight: vec![0.0; n],
            contributors: vec![0; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// 8-bit RGB, values clamped to [0, 1]. Values are stored as-is
    /// (display-referred, no transfer curve).
    pub fn to_rgb8(&self) -> image::RgbImage {
        rgb8_from(&self.color, self.width, self.height)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.png_bytes()?)?;
        Ok(())
    }

    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_rgb8().write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    /// RGBA float planes.
    pub fn planes(&self) -> Planes {
        let mut channels = vec![Vec::with_capacity(self.pixel_count()); 4];
        for (c, a) in self.color.iter().zip(&self.alpha) {
            for ch in 0..3 {
                channels[ch].push(c[ch] as f32);
            }
            channels[3].push(*a as f32);
        }
        Planes {
            width: self.width,
            height: self.height,
            channels,
        }
    }
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn rgb8_from(color: &[[f64; 3]], width: u32, height: u32) -> image::RgbImage {
    let mut img = image::RgbImage::new(width, height);
    for (i, px) in img.pixels_mut().enumerate() {
        let c = color[i];
        *px = image::Rgb([quantize(c[0]), quantize(c[1]), quantize(c[2])]);
    }
    img
}

/// Per-pixel unit 2D orientation with confidence and validity.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationImage {
    pub width: u32,
    pub height: u32,
    pub dir: Vec<[f64; 2]>,
    pub confidence: Vec<f64>,
    pub valid: Vec<bool>,
}

impl OrientationImage {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            dir: vec![[0.0; 2]; n],
            confidence: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Angle in [0, π) of each pixel's orientation.
    pub fn angle(&self, px: usize) -> f64 {
        let [x, y] = self.dir[px];
        let a = y.atan2(x);
        if a < 0.0 {
            a + std::f64::consts::PI
        } else if a >= std::f64::consts::PI {
            a - std::f64::consts::PI
        } else {
            a
        }
    }

    /// Planes: x, y, confidence, valid (0/1).
    pub fn planes(&self) -> Planes {
        let mut channels = vec![Vec::with_capacity(self.dir.len()); 4];
        for i in 0..self.dir.len() {
            channels[0].push(self.dir[i][0] as f32);
            channels[1].push(self.dir[i][1] as f32);
            channels[2].push(self.confidence[i] as f32);
            channels[3].push(if self.valid[i] { 1.0 } else { 0.0 });
        }
        Planes {
            width: self.width,
            height: self.height,
            channels,
        }
    }

    /// Inverse of [`OrientationImage::planes`].
    pub fn from_planes(p: &Planes) -> Result<Self> {
        if p.channels.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: "4 orientation channels".into(),
                got: format!("{}", p.channels.len()),
            });
        }
        let mut img = Self::new(p.width, p.height);
        for i in 0..img.dir.len() {
            img.dir[i] = [p.channels[0][i] as f64, p.channels[1][i] as f64];
            img.confidence[i] = p.channels[2][i] as f64;
            img.valid[i] = p.channels[3][i] > 0.5;
        }
        Ok(img)
    }
}

/// Raw float planes: `"GHFB"`, u32 width, u32 height, u32 channel count,
/// then each channel's `width * height` little-endian f32 values in turn.
#[derive(Clone, Debug, PartialEq)]
pub struct Planes {
    pub width: u32,
    pub height: u32,
    pub channels: Vec<Vec<f32>>,
}

const GHFB_MAGIC: &[u8; 4] = b"GHFB";

impl Planes {
    pub fn encode(&self) -> Vec<u8> {
        let n = self.width as usize * self.height as usize;
        let mut out = Vec::with_capacity(16 + 4 * n * self.channels.len());
        out.extend_from_slice(GHFB_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&(self.channels.len() as u32).to_le_bytes());
        for ch in &self.channels {
            for v in ch {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = crate::io::ByteReader::new(bytes);
        let magic = r.take(4)?;
        if magic != GHFB_MAGIC {
            return Err(Error::BadMagic(magic.to_vec()));
        }
        let width = r.u32()?;
        let height = r.u32()?;
        let count = r.u32()? as usize;
        let n = width as usize * height as usize;
        let needed = n.checked_mul(count).and_then(|x| x.checked_mul(4));
        if needed.is_none_or(|b| b > r.remaining()) {
            return Err(Error::Truncated {
                offset: r.offset(),
                needed: needed.unwrap_or(usize::MAX),
                available: r.remaining(),
            });
        }
        let mut channels = Vec::with_capacity(count);
        for _ in 0..count {
            let mut ch = Vec::with_capacity(n);
            for _ in 0..n {
                ch.push(r.f32()?);
            }
            channels.push(ch);
        }
        r.finish()?;
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.encode())?;
        Ok(())
    }
}
