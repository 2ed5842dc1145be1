//! PNG input and output. Pixel values map linearly between [0, 1] and
//! 8-bit codes, with no transfer curve.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    /// Alpha channel when the file has one.
    pub alpha: Option<Vec<f64>>,
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    Ok(image::open(path)?)
}

pub fn read_png(path: &Path) -> Result<RgbaImage> {
    let img = open(path)?;
    let has_alpha = img.color().has_alpha();
    let rgba = img.to_rgba8();
    let (width, height) = rgba.dimensions();
    let color = rgba
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    let alpha = has_alpha.then(|| rgba.pixels().map(|p| p[3] as f64 / 255.0).collect());
    Ok(RgbaImage {
        width,
        height,
        color,
        alpha,
    })
}

/// Single-channel image (luma of color files) in [0, 1].
pub fn read_gray(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let img = open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((w, h, img.pixels().map(|p| p[0] as f64 / 255.0).collect()))
}

pub fn write_rgb(path: &Path, color: &[[f64; 3]], width: u32, height: u32) -> Result<()> {
    crate::raster::frame_rgb8(color, width, height).save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn write_rgba(path: &Path, color: &[[f64; 3]], alpha: &[f64], width: u32, height: u32) -> Result<()> {
    let q = crate::raster::quantize;
    let mut img = image::RgbaImage::new(width, height);
    for (i, px) in img.pixels_mut().enumerate() {
        let c = color[i];
        *px = image::Rgba([q(c[0]), q(c[1]), q(c[2]), q(alpha[i])]);
    }
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn write_gray(path: &Path, values: &[f64], width: u32, height: u32) -> Result<()> {
    let q = crate::raster::quantize;
    let img = image::GrayImage::from_fn(width, height, |x, y| image::Luma([q(values[(y * width + x) as usize])]));
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
