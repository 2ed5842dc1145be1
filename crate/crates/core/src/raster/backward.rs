use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};

use super::tiles::pixel_contributors;
use super::{kernel_slope, projection_jacobian, ForwardPass, Splat2D};
use crate::camera::CameraView;
use crate::exec::Exec;
use crate::math::Vec3;

/// Loss gradient with respect to one splat's screen-space parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplatGrad {
    pub mean2d: Vector2<f64>,
    /// Gradient with respect to the dilated 2D covariance, entries treated
    /// as independent.
    pub cov2d: Matrix2<f64>,
    pub opacity: f64,
    pub payload: [f64; 3],
}

/// Loss gradient with respect to a 3D Gaussian's mean and covariance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrimGrad {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
}

#[derive(Clone, Default)]
struct Acc {
    mean2d: Vector2<f64>,
    conic: Matrix2<f64>,
    opacity: f64,
    payload: [f64; 3],
}

/// Backpropagate per-pixel color and alpha gradients through compositing.
///
/// Uses the suffix recursion `R_n+1 = bg`, `R_i = w_i c_i + (1 − w_i) R_i+1`,
/// so `∂C/∂w_i = T_i (c_i − R_i+1)` without dividing by `1 − w_i`. Per-tile
/// partial sums are merged in tile order, which keeps the result identical
/// under both execution policies.
pub fn backward(fwd: &ForwardPass, d_color: &[[f64; 3]], d_alpha: Option<&[f64]>, exec: Exec) -> Vec<SplatGrad> {
    let bins = &fwd.bins;
    let splats = &fwd.splats;
    let partials = exec.map(bins.tile_count(), |t| {
        let list = &bins.lists[t];
        let mut acc = vec![Acc::default(); list.len()];
        if list.is_empty() {
            return acc;
        }
        let (x0, x1, y0, y1) = bins.tile_pixels(t);
        let mut contrib = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                let p = y * bins.width + x;
                let gc = d_color[p];
                let ga = d_alpha.map_or(0.0, |a| a[p]);
                if gc == [0.0; 3] && ga == 0.0 {
                    continue;
                }
                let (px, py) = (x as f64, y as f64);
                pixel_contributors(splats, list, px, py, fwd.early_stop, &mut contrib);
                let mut r = fwd.background;
                let mut ra = 0.0;
                for &(j, g, w, t_before) in contrib.iter().rev() {
                    let s = &splats[list[j as usize] as usize];
                    let c = s.payload;
                    let mut gw = ga * t_before * (1.0 - ra);
                    for ch in 0..3 {
                        gw += gc[ch] * t_before * (c[ch] - r[ch]);
                    }
                    let a = &mut acc[j as usize];
                    for ch in 0..3 {
                        a.payload[ch] += gc[ch] * t_before * w;
                        r[ch] = w * c[ch] + (1.0 - w) * r[ch];
                    }
                    ra = w + (1.0 - w) * ra;
                    a.opacity += gw * g;
                    let (m, d) = s.mahalanobis(px, py);
                    let gm = gw * s.opacity * kernel_slope(m);
                    if gm != 0.0 {
                        a.mean2d -= 2.0 * gm * (s.conic * d);
                        a.conic += gm * d * d.transpose();
                    }
                }
            }
        }
        acc
    });
    let mut total = vec![Acc::default(); splats.len()];
    for (t, part) in partials.into_iter().enumerate() {
        for (&k, a) in bins.lists[t].iter().zip(part) {
            let dst = &mut total[k as usize];
            dst.mean2d += a.mean2d;
            dst.conic += a.conic;
            dst.opacity += a.opacity;
            for ch in 0..3 {
                dst.payload[ch] += a.payload[ch];
            }
        }
    }
    total
        .into_iter()
        .zip(splats)
        .map(|(a, s)| SplatGrad {
            mean2d: a.mean2d,
            cov2d: -(s.conic * a.conic * s.conic),
            opacity: a.opacity,
            payload: a.payload,
        })
        .collect()
}

/// Chain a splat gradient back to the 3D mean and covariance through
/// `Σ' = J W Σ Wᵀ Jᵀ + εI` and the perspective projection of the mean.
/// `d_cam` is any extra gradient already known for the camera-space center.
pub fn project_backward(
    cam: &CameraView,
    splat: &Splat2D,
    cov3d: &Matrix3<f64>,
    grad: &SplatGrad,
    d_cam: Vec3,
) -> PrimGrad {
    let w = cam.rotation();
    let t = splat.cam_mean;
    let j = projection_jacobian(cam, &t);
    let tm: Matrix2x3<f64> = j * w;
    let g2 = grad.cov2d;
    let cov = tm.transpose() * g2 * tm;
    let g_tm: Matrix2x3<f64> = (g2 + g2.transpose()) * tm * cov3d;
    let g_j: Matrix2x3<f64> = g_tm * w.transpose();

    let g_t = d_cam + j.transpose() * grad.mean2d + jacobian_backward(cam, &t, &g_j);
    PrimGrad {
        mean: w.transpose() * g_t,
        cov,
    }
}

/// Gradient with respect to the camera-space point `t` of a loss whose
/// gradient with respect to `projection_jacobian(cam, t)` is `g_j`.
pub fn jacobian_backward(cam: &CameraView, t: &Vec3, g_j: &Matrix2x3<f64>) -> Vec3 {
    let iz = 1.0 / t.z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    Vec3::new(
        g_j[(0, 2)] * (-cam.fx * iz2),
        g_j[(1, 2)] * (-cam.fy * iz2),
        g_j[(0, 0)] * (-cam.fx * iz2)
            + g_j[(0, 2)] * (2.0 * cam.fx * t.x * iz3)
            + g_j[(1, 1)] * (-cam.fy * iz2)
            + g_j[(1, 2)] * (2.0 * cam.fy * t.y * iz3),
    )
}
