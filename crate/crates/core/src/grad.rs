//! Parameter gradients: compositing and projection gradients mapped back
//! through SH evaluation, the cylinder covariance and strand chaining.

use nalgebra::{Matrix2x3, Matrix3, Vector2};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::OrientedField;
use crate::math::{self, Quat, Vec3};
use crate::model::HairModel;
use crate::raster::{self, ForwardPass, OrientationImage, PrimitiveSet, NO_SPLAT};
use crate::sh;

/// Gradients for every hair segment (strand-major) or field Gaussian.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradBuffer {
    pub rotation: Vec<Quat>,
    pub length: Vec<f64>,
    pub opacity_logit: Vec<f64>,
    pub sh: Vec<Vec<[f64; 3]>>,
    /// Gradient with respect to each Gaussian's center. For hair segments
    /// this is already folded into `rotation` and `length` and is kept for
    /// density statistics; for field Gaussians it is the position gradient.
    pub center: Vec<Vec3>,
}

impl GradBuffer {
    pub fn zeros(n: usize, sh_count: usize) -> Self {
        Self {
            rotation: vec![[0.0; 4]; n],
            length: vec![0.0; n],
            opacity_logit: vec![0.0; n],
            sh: vec![vec![[0.0; 3]; sh_count]; n],
            center: vec![Vec3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.length.len()
    }

    pub fn is_empty(&self) -> bool {
        self.length.is_empty()
    }

    pub fn add_scaled(&mut self, other: &GradBuffer, s: f64) {
        for i in 0..self.len() {
            for k in 0..4 {
                self.rotation[i][k] += s * other.rotation[i][k];
            }
            self.length[i] += s * other.length[i];
            self.opacity_logit[i] += s * other.opacity_logit[i];
            for (a, b) in self.sh[i].iter_mut().zip(&other.sh[i]) {
                for ch in 0..3 {
                    a[ch] += s * b[ch];
                }
            }
            self.center[i] += s * other.center[i];
        }
    }
}

/// Per-primitive gradient with respect to the quantities the rasterizer
/// consumes.
#[derive(Clone, Debug)]
pub struct PrimAccum {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
    /// With respect to post-sigmoid opacity.
    pub opacity: f64,
    pub sh: Vec<[f64; 3]>,
    /// With respect to the unit fiber direction (orientation loss).
    pub direction: Vec3,
}

impl PrimAccum {
    fn zeros(sh_count: usize) -> Self {
        Self {
            mean: Vec3::zeros(),
            cov: Matrix3::zeros(),
            opacity: 0.0,
            sh: vec![[0.0; 3]; sh_count],
            direction: Vec3::zeros(),
        }
    }
}

pub fn accum_zeros(n: usize, sh_degree: usize) -> Vec<PrimAccum> {
    vec![PrimAccum::zeros(sh::coeff_count(sh_degree)); n]
}

/// Back-propagate per-pixel color/alpha gradients of an SH-color forward
/// pass into `acc` (indexed like `set`).
pub fn splat_backward(
    set: &PrimitiveSet<'_>,
    cam: &CameraView,
    fwd: &ForwardPass,
    d_color: &[[f64; 3]],
    d_alpha: Option<&[f64]>,
    exec: Exec,
    acc: &mut [PrimAccum],
) {
    let grads = raster::backward(fwd, d_color, d_alpha, exec);
    let center = cam.center();
    let count = sh::coeff_count(set.sh_degree);
    let per_splat = exec.map(fwd.splats.len(), |k| {
        let s = &fwd.splats[k];
        let g = &grads[k];
        let p = &set.prims[s.source_id];
        let mut d_sh = vec![[0.0; 3]; count];
        let v = p.mean - center;
        let d_v = sh::eval_backward(p.sh, set.sh_degree, &v, s.clamped, g.payload, &mut d_sh);
        let pg = raster::project_backward(cam, s, &p.cov, g, Vec3::zeros());
        (pg.mean + d_v, pg.cov, g.opacity, d_sh)
    });
    for (s, (dm, dc, dop, dsh)) in fwd.splats.iter().zip(per_splat) {
        let a = &mut acc[s.source_id];
        a.mean += dm;
        a.cov += dc;
        a.opacity += dop;
        for (x, y) in a.sh.iter_mut().zip(dsh) {
            for ch in 0..3 {
                x[ch] += y[ch];
            }
        }
    }
}

/// Orientation image from a forward pass: the canonical image direction of
/// the top splat at every pixel whose alpha reaches `alpha_valid`.
pub fn orientation_from_pass(set: &PrimitiveSet<'_>, cam: &CameraView, fwd: &ForwardPass, alpha_valid: f64) -> OrientationImage {
    let mut img = OrientationImage::new(cam.width, cam.height);
    for px in 0..cam.pixel_count() {
        let top = fwd.frame.top[px];
        if top == NO_SPLAT || fwd.frame.alpha[px] < alpha_valid {
            continue;
        }
        let s = &fwd.splats[top as usize];
        if let Some(d) = raster::image_direction(cam, &s.cam_mean, &set.prims[s.source_id].direction) {
            img.dir[px] = [d.x, d.y];
            img.confidence[px] = 1.0;
            img.valid[px] = true;
        }
    }
    img
}

/// Orientation loss `Σ (1 − |P·O|)` over pixels valid in `target`, where `P`
/// is the image direction of each pixel's top splat, and its gradient
/// (scaled by `weight`) with respect to the top splats' directions and
/// centers. Pixels without a rendered orientation contribute 1.
pub fn orientation_backward(
    set: &PrimitiveSet<'_>,
    cam: &CameraView,
    fwd: &ForwardPass,
    target: &OrientationImage,
    alpha_valid: f64,
    weight: f64,
    acc: &mut [PrimAccum],
) -> f64 {
    let w = cam.rotation();
    let mut loss = 0.0;
    for px in 0..cam.pixel_count() {
        if !target.valid[px] {
            continue;
        }
        let top = fwd.frame.top[px];
        if top == NO_SPLAT || fwd.frame.alpha[px] < alpha_valid {
            loss += 1.0;
            continue;
        }
        let s = &fwd.splats[top as usize];
        let prim = &set.prims[s.source_id];
        let j = raster::projection_jacobian(cam, &s.cam_mean);
        let v = w * prim.direction;
        let r: Vector2<f64> = j * v;
        let n = r.norm();
        if n < 1e-12 {
            loss += 1.0;
            continue;
        }
        let p = r / n;
        let o = Vector2::new(target.dir[px][0], target.dir[px][1]);
        let dot = p.dot(&o);
        loss += 1.0 - dot.abs();
        let g_p = -weight * dot.signum() * o;
        let g_r = (g_p - p * p.dot(&g_p)) / n;
        let g_v = j.transpose() * g_r;
        let g_j: Matrix2x3<f64> = g_r * v.transpose();
        let g_t = raster::jacobian_backward(cam, &s.cam_mean, &g_j);
        let a = &mut acc[s.source_id];
        a.direction += w.transpose() * g_v;
        a.mean += w.transpose() * g_t;
    }
    loss
}

/// Gradient with respect to the axis `u` and length `s` of a cylinder
/// covariance `d² I + (s² − d²) u uᵀ`, given the covariance gradient `g`.
pub fn cylinder_cov_backward(u: &Vec3, d: f64, s: f64, g: &Matrix3<f64>) -> (Vec3, f64) {
    let sym = g + g.transpose();
    let du = (s * s - d * d) * (sym * u);
    let ds = 2.0 * s * u.dot(&(g * u));
    (du, ds)
}

/// Map per-primitive accumulators of a hair model (the first
/// `segment_count` entries of `PrimitiveSet::from_model`) to parameter
/// gradients. A segment center is `root + Σ_{k<j} s_k u_k + ½ s_j u_j`, so
/// each center gradient also reaches every earlier segment of its strand.
pub fn hair_backward(model: &HairModel, acc: &[PrimAccum]) -> GradBuffer {
    let n = model.segment_count();
    let mut out = GradBuffer::zeros(n, sh::coeff_count(model.sh_degree));
    let mut base = 0;
    for strand in &model.strands {
        let m = strand.segments.len();
        let mut tail = Vec3::zeros();
        for j in (0..m).rev() {
            let g = &strand.segments[j];
            let a = &acc[base + j];
            let u = g.direction();
            let s = g.length;
            let (du_cov, ds_cov) = cylinder_cov_backward(&u, g.diameter, s, &a.cov);
            let du = 0.5 * s * a.mean + s * tail + du_cov + a.direction;
            let ds = u.dot(&(0.5 * a.mean + tail)) + ds_cov;
            let i = base + j;
            out.rotation[i] = math::quat_axis_z_grad(&g.rotation, &du);
            out.length[i] = ds;
            let alpha = g.opacity();
            out.opacity_logit[i] = a.opacity * alpha * (1.0 - alpha);
            out.sh[i].clone_from(&a.sh);
            out.center[i] = a.mean;
            tail += a.mean;
        }
        base += m;
    }
    out
}

/// Same for a free-Gaussian field: centers are parameters themselves.
pub fn field_backward(field: &OrientedField, acc: &[PrimAccum]) -> GradBuffer {
    let n = field.len();
    let mut out = GradBuffer::zeros(n, sh::coeff_count(field.sh_degree));
    for i in 0..n {
        let g = &field.gaussians[i];
        let a = &acc[i];
        let u = g.direction();
        let (du, ds) = cylinder_cov_backward(&u, g.diameter, g.length, &a.cov);
        out.rotation[i] = math::quat_axis_z_grad(&g.rotation, &(du + a.direction));
        out.length[i] = ds;
        let alpha = g.opacity();
        out.opacity_logit[i] = a.opacity * alpha * (1.0 - alpha);
        out.sh[i].clone_from(&a.sh);
        out.center[i] = a.mean;
    }
    out
}

/// Gradients of a loss on one SH-color forward pass of `model`. Fails if
/// the model changed since `fwd` was rendered.
pub fn model_backward(
    model: &HairModel,
    cam: &CameraView,
    fwd: &ForwardPass,
    d_color: &[[f64; 3]],
    d_alpha: Option<&[f64]>,
    exec: Exec,
) -> Result<GradBuffer> {
    if fwd.generation != model.generation {
        return Err(Error::StaleIntermediates {
            model: model.generation,
            forward: fwd.generation,
        });
    }
    let set = PrimitiveSet::from_model(model, true);
    let mut acc = accum_zeros(set.len(), model.sh_degree);
    splat_backward(&set, cam, fwd, d_color, d_alpha, exec, &mut acc);
    Ok(hair_backward(model, &acc))
}

/// Add the (pre-weighted) smoothness gradients to `grads`.
pub fn add_smoothness(model: &HairModel, sm: &crate::loss::Smoothness, grads: &mut GradBuffer) {
    let mut i = 0;
    for strand in &model.strands {
        for g in &strand.segments {
            let q = math::quat_axis_z_grad(&g.rotation, &sm.d_dir[i]);
            for k in 0..4 {
                grads.rotation[i][k] += q[k];
            }
            grads.length[i] += sm.d_length[i];
            grads.opacity_logit[i] += sm.d_logit[i];
            i += 1;
        }
    }
}
