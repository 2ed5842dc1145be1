//! Loss terms and their gradients.
//!
//! Images are row-major `[f64; 3]` pixel slices. Every function returning a
//! gradient returns the gradient of exactly the value it returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::HairModel;
use crate::raster::OrientationImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub l1: f64,
    pub dssim: f64,
    pub ori: f64,
    pub alp: f64,
    pub opa: f64,
    pub pam: f64,
    pub geo_pos: f64,
    pub geo_dir: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l1: 0.8,
            dssim: 0.2,
            ori: 0.1,
            alp: 0.1,
            opa: 0.01,
            pam: 0.01,
            geo_pos: 1.0,
            geo_dir: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.l1,
            self.dssim,
            self.ori,
            self.alp,
            self.opa,
            self.pam,
            self.geo_pos,
            self.geo_dir,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParam("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn check_dims(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: format!("{what} of {a} pixels"),
            got: format!("{b}"),
        });
    }
    Ok(())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut t: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
        let x = i as f64 - half;
        (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|v| *v /= s);
    t
}

/// Separable same-size filtering of one plane with zero padding.
fn blur(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += t * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = y as isize + k as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += t * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn plane(img: &[[f64; 3]], ch: usize) -> Vec<f64> {
    img.iter().map(|p| p[ch]).collect()
}

/// Mean SSIM over all pixels and channels and, optionally, its gradient
/// with respect to `x`.
pub fn ssim(x: &[[f64; 3]], y: &[[f64; 3]], w: usize, h: usize, want_grad: bool) -> Result<(f64, Option<Vec<[f64; 3]>>)> {
    check_dims(w * h, x.len(), "image")?;
    check_dims(x.len(), y.len(), "image")?;
    let n = w * h;
    if n == 0 {
        return Err(Error::Empty("image"));
    }
    let taps = ssim_taps();
    let mut total = 0.0;
    let mut grad = want_grad.then(|| vec![[0.0; 3]; n]);
    let norm = 1.0 / (3 * n) as f64;
    for ch in 0..3 {
        let xs = plane(x, ch);
        let ys = plane(y, ch);
        let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a * b).collect();
        let mx = blur(&xs, w, h, &taps);
        let my = blur(&ys, w, h, &taps);
        let mxx = blur(&xx, w, h, &taps);
        let myy = blur(&yy, w, h, &taps);
        let mxy = blur(&xy, w, h, &taps);
        let mut d_mx = vec![0.0; n];
        let mut d_mxx = vec![0.0; n];
        let mut d_mxy = vec![0.0; n];
        for p in 0..n {
            let (ux, uy) = (mx[p], my[p]);
            let a1 = 2.0 * ux * uy + SSIM_C1;
            let a2 = 2.0 * (mxy[p] - ux * uy) + SSIM_C2;
            let b1 = ux * ux + uy * uy + SSIM_C1;
            let b2 = (mxx[p] - ux * ux) + (myy[p] - uy * uy) + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                d_mx[p] = norm * ((2.0 * uy * a2 - 2.0 * uy * a1) / (b1 * b2) - s * 2.0 * ux / b1 + s * 2.0 * ux / b2);
                d_mxx[p] = norm * (-s / b2);
                d_mxy[p] = norm * (2.0 * a1 / (b1 * b2));
            }
        }
        if let Some(g) = grad.as_mut() {
            let g_mx = blur(&d_mx, w, h, &taps);
            let g_mxx = blur(&d_mxx, w, h, &taps);
            let g_mxy = blur(&d_mxy, w, h, &taps);
            for p in 0..n {
                g[p][ch] = g_mx[p] + 2.0 * xs[p] * g_mxx[p] + ys[p] * g_mxy[p];
            }
        }
    }
    Ok((total * norm, grad))
}

#[derive(Clone, Debug)]
pub struct Photometric {
    pub l1: f64,
    pub ssim: f64,
    /// `w_l1 · l1 + w_dssim · (1 − ssim) / 2`.
    pub value: f64,
    pub grad: Vec<[f64; 3]>,
}

/// `w_l1 · mean|x − y| + w_dssim · (1 − SSIM(x, y)) / 2`, gradient w.r.t. `x`.
pub fn photometric(x: &[[f64; 3]], y: &[[f64; 3]], w: usize, h: usize, weights: &LossWeights) -> Result<Photometric> {
    let (s, sg) = ssim(x, y, w, h, weights.dssim != 0.0)?;
    let n = (3 * w * h) as f64;
    let mut l1 = 0.0;
    let mut grad = vec![[0.0; 3]; x.len()];
    for p in 0..x.len() {
        for ch in 0..3 {
            let d = x[p][ch] - y[p][ch];
            l1 += d.abs();
            grad[p][ch] = weights.l1 * sign(d) / n;
        }
    }
    if let Some(sg) = sg {
        for (g, s) in grad.iter_mut().zip(sg) {
            for ch in 0..3 {
                g[ch] -= 0.5 * weights.dssim * s[ch];
            }
        }
    }
    let l1 = l1 / n;
    Ok(Photometric {
        l1,
        ssim: s,
        value: weights.l1 * l1 + weights.dssim * (1.0 - s) * 0.5,
        grad,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ |A − Â|` and its gradient with respect to `Â`.
pub fn alpha_loss(rendered: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dims(target.len(), rendered.len(), "alpha map")?;
    let mut v = 0.0;
    let g = rendered
        .iter()
        .zip(target)
        .map(|(r, t)| {
            v += (t - r).abs();
            sign(r - t)
        })
        .collect();
    Ok((v, g))
}

/// `Σ (1 − |P·O|)` over pixels valid in `target`. A rendered pixel without
/// orientation counts as `P = 0`.
pub fn orientation_loss(rendered: &OrientationImage, target: &OrientationImage) -> Result<f64> {
    check_dims(target.dir.len(), rendered.dir.len(), "orientation map")?;
    let mut v = 0.0;
    for p in 0..target.dir.len() {
        if !target.valid[p] {
            continue;
        }
        let [px, py] = if rendered.valid[p] { rendered.dir[p] } else { [0.0, 0.0] };
        let [ox, oy] = target.dir[p];
        v += 1.0 - (px * ox + py * oy).abs();
    }
    Ok(v)
}

/// Strand smoothness terms with gradients.
#[derive(Clone, Debug, Default)]
pub struct Smoothness {
    pub opa: f64,
    pub pam: f64,
    /// Per segment (strand-major): d/d opacity logit of `w_opa·opa + w_pam·pam`.
    pub d_logit: Vec<f64>,
    /// Per segment: gradient with respect to the unit direction.
    pub d_dir: Vec<Vec3>,
    pub d_length: Vec<f64>,
}

/// `L_opa = ½ Σ (|α_j+1 − α_j| + |α̂_j+1 − α̂_j|)` with `α̂_j = α_j+1 − α_j`,
/// and `L_pam = Σ (‖d_j+1 − d_j‖₁ + |s_j+1 − s_j|)`, both along each strand.
pub fn smoothness(model: &HairModel, w_opa: f64, w_pam: f64) -> Smoothness {
    let n = model.segment_count();
    let mut out = Smoothness {
        d_logit: vec![0.0; n],
        d_dir: vec![Vec3::zeros(); n],
        d_length: vec![0.0; n],
        ..Default::default()
    };
    let mut base = 0;
    for strand in &model.strands {
        let segs = &strand.segments;
        let m = segs.len();
        let alpha: Vec<f64> = segs.iter().map(|g| g.opacity()).collect();
        let dirs: Vec<Vec3> = segs.iter().map(|g| g.direction()).collect();
        let mut d_alpha = vec![0.0; m];
        for j in 0..m.saturating_sub(1) {
            let d = alpha[j + 1] - alpha[j];
            out.opa += 0.5 * d.abs();
            d_alpha[j + 1] += 0.5 * sign(d);
            d_alpha[j] -= 0.5 * sign(d);
        }
        for j in 0..m.saturating_sub(2) {
            let dd = alpha[j + 2] - 2.0 * alpha[j + 1] + alpha[j];
            out.opa += 0.5 * dd.abs();
            let s = 0.5 * sign(dd);
            d_alpha[j + 2] += s;
            d_alpha[j + 1] -= 2.0 * s;
            d_alpha[j] += s;
        }
        for j in 0..m.saturating_sub(1) {
            let dv = dirs[j + 1] - dirs[j];
            out.pam += dv.abs().sum();
            let sv = dv.map(sign);
            out.d_dir[base + j + 1] += w_pam * sv;
            out.d_dir[base + j] -= w_pam * sv;
            let ds = segs[j + 1].length - segs[j].length;
            out.pam += ds.abs();
            out.d_length[base + j + 1] += w_pam * sign(ds);
            out.d_length[base + j] -= w_pam * sign(ds);
        }
        for j in 0..m {
            out.d_logit[base + j] = w_opa * d_alpha[j] * alpha[j] * (1.0 - alpha[j]);
        }
        base += m;
    }
    out
}

/// Peak signal-to-noise ratio (dB) for images in [0, 1].
pub fn psnr(x: &[[f64; 3]], y: &[[f64; 3]]) -> f64 {
    let mse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (3 * x.len()) as f64;
    -10.0 * mse.log10()
}
