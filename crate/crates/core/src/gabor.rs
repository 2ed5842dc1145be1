//! Dense 2D orientation maps from a bank of oriented Gabor filters.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raster::OrientationImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborConfig {
    pub orientations: usize,
    /// Carrier wavelength in pixels.
    pub wavelength: f64,
    /// Envelope standard deviation across the stripes, in pixels.
    pub sigma: f64,
    /// Envelope aspect ratio (along-stripe extent is `sigma / aspect`).
    pub aspect: f64,
    /// Minimum `(max − mean) / max` response for a valid pixel.
    pub min_confidence: f64,
    /// Minimum peak response relative to the mean image intensity.
    pub min_response: f64,
    pub exec: Exec,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            orientations: 32,
            wavelength: 4.0,
            sigma: 2.0,
            aspect: 0.25,
            min_confidence: 0.1,
            min_response: 1e-3,
            exec: Exec::default(),
        }
    }
}

/// Grayscale image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Gray {
    pub fn from_rgb(rgb: &[[f64; 3]], width: usize, height: usize) -> Self {
        let data = rgb
            .iter()
            .map(|c| 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2])
            .collect();
        Self { width, height, data }
    }
}

/// Complex kernel: zero-mean cosine (real) and sine (imaginary) carriers
/// across direction `theta`, under an anisotropic Gaussian envelope.
pub fn gabor_kernel(theta: f64, cfg: &GaborConfig) -> (usize, Vec<Complex<f64>>) {
    let r = (3.0 * cfg.sigma / cfg.aspect.min(1.0)).ceil() as isize;
    let side = (2 * r + 1) as usize;
    let (c, s) = (theta.cos(), theta.sin());
    let mut k = Vec::with_capacity(side * side);
    let mut env_sum = 0.0;
    let mut even_sum = 0.0;
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            let env = (-(xr * xr + cfg.aspect * cfg.aspect * yr * yr) / (2.0 * cfg.sigma * cfg.sigma)).exp();
            let ph = 2.0 * PI * xr / cfg.wavelength;
            env_sum += env;
            even_sum += env * ph.cos();
            k.push((env, Complex::new(env * ph.cos(), env * ph.sin())));
        }
    }
    let shift = even_sum / env_sum;
    (side, k.into_iter().map(|(env, v)| Complex::new(v.re - shift * env, v.im)).collect())
}

fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

struct Fft2 {
    w: usize,
    h: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(w: usize, h: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            w,
            h,
            row: p.plan_fft_forward(w),
            col: p.plan_fft_forward(h),
            row_inv: p.plan_fft_inverse(w),
            col_inv: p.plan_fft_inverse(h),
        }
    }

    fn run(&self, data: &mut [Complex<f64>], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row, &self.col)
        };
        for r in data.chunks_mut(self.w) {
            row.process(r);
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                buf[y] = data[y * self.w + x];
            }
            col.process(&mut buf);
            for y in 0..self.h {
                data[y * self.w + x] = buf[y];
            }
        }
        if inverse {
            let s = 1.0 / (self.w * self.h) as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Per-pixel response magnitude of every filter in the bank.
pub fn filter_bank_energy(img: &Gray, cfg: &GaborConfig) -> Vec<Vec<f64>> {
    let (w, h) = (img.width, img.height);
    let (side, _) = gabor_kernel(0.0, cfg);
    let r = side / 2;
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let fft = Fft2::new(pw, ph);
    let mut spectrum: Vec<Complex<f64>> = (0..pw * ph)
        .map(|i| {
            let (x, y) = ((i % pw) as isize - r as isize, (i / pw) as isize - r as isize);
            Complex::new(img.data[clamp(y, h) * w + clamp(x, w)], 0.0)
        })
        .collect();
    fft.run(&mut spectrum, false);
    cfg.exec.map(cfg.orientations, |k| {
        let theta = PI * k as f64 / cfg.orientations as f64;
        let (side, kern) = gabor_kernel(theta, cfg);
        let mut kf = vec![Complex::new(0.0, 0.0); pw * ph];
        for ky in 0..side {
            for kx in 0..side {
                let dx = (kx as isize - r as isize).rem_euclid(pw as isize) as usize;
                let dy = (ky as isize - r as isize).rem_euclid(ph as isize) as usize;
                kf[dy * pw + dx] = kern[ky * side + kx];
            }
        }
        fft.run(&mut kf, false);
        for (a, b) in kf.iter_mut().zip(&spectrum) {
            *a *= b;
        }
        fft.run(&mut kf, true);
        let mut e = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                e.push(kf[(y + r) * pw + x + r].norm());
            }
        }
        e
    })
}

/// Orientation map of `img` restricted to `mask`. The returned direction
/// is the stripe (line) direction, a unit vector in the upper half-plane
/// of image coordinates (x right, y down).
pub fn gabor_orientation(img: &Gray, mask: Option<&[bool]>, cfg: &GaborConfig) -> Result<OrientationImage> {
    let n = img.width * img.height;
    if let Some(m) = mask {
        if m.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("mask of {n} pixels"),
                got: m.len().to_string(),
            });
        }
        if !m.iter().any(|&v| v) {
            return Err(Error::Empty("mask"));
        }
    }
    if n == 0 {
        return Err(Error::Empty("image"));
    }
    if cfg.orientations < 3 {
        return Err(Error::InvalidParam("need at least 3 filter orientations".into()));
    }
    let energy = filter_bank_energy(img, cfg);
    let k = cfg.orientations;
    let scale = img.data.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let floor = cfg.min_response * scale;
    let mut out = OrientationImage::new(img.width as u32, img.height as u32);
    for p in 0..n {
        if mask.is_some_and(|m| !m[p]) {
            continue;
        }
        let (mut best, mut emax, mut esum) = (0, f64::MIN, 0.0);
        for (i, e) in energy.iter().enumerate() {
            esum += e[p];
            if e[p] > emax {
                emax = e[p];
                best = i;
            }
        }
        if !(emax > floor) || emax <= 0.0 {
            continue;
        }
        let conf = (emax - esum / k as f64) / emax;
        if conf < cfg.min_confidence {
            continue;
        }
        let em = energy[(best + k - 1) % k][p];
        let ep = energy[(best + 1) % k][p];
        let denom = em - 2.0 * emax + ep;
        let delta = if denom < 0.0 { (0.5 * (em - ep) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let theta = PI * (best as f64 + delta) / k as f64;
        let line = theta + 0.5 * PI;
        let v = crate::raster::canonical_orientation(nalgebra::Vector2::new(line.cos(), line.sin()));
        out.dir[p] = [v.x, v.y];
        out.confidence[p] = conf;
        out.valid[p] = true;
    }
    Ok(out)
}
