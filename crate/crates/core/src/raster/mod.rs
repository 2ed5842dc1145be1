//! Tile-based, depth-sorted splatting of 3D Gaussians.
//!
//! Rendering runs in three stages: [`project`] maps every primitive to a
//! screen-space [`Splat2D`]; [`TileBins`] lists, per 16×16 tile, the splats
//! whose 3σ box touches it, sorted front to back; the compositor walks each
//! pixel's list accumulating `C = Σ T_i w_i c_i` with
//! `T_i = Π_{j<i} (1 − w_j)` and `w = α g(u)`.
//!
//! The splat kernel is truncated at Mahalanobis radius 3 and shifted so it
//! is continuous there: `g = (exp(−m/2) − e) / (1 − e)` with `e = exp(−9/2)`,
//! `g = 0` for `m ≥ 9`. It still peaks at exactly 1. The tile lists cover the
//! full support, so tiling changes nothing except evaluation order.

mod backward;
mod frame;
mod light;
mod tiles;

pub use backward::{backward, jacobian_backward, project_backward, PrimGrad, SplatGrad};
pub use frame::{quantize, rgb8_from as frame_rgb8, FrameBuffer, OrientationImage, Planes, NO_SPLAT};
pub use light::{hair_transmittance, light_camera, light_pass, transmittance, LightPassConfig};
pub use tiles::TileBins;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::exec::Exec;
use crate::math::Vec3;
use crate::model::HairModel;
use crate::sh;

/// Mahalanobis² at which the kernel support ends (3σ).
pub const KERNEL_CUTOFF: f64 = 9.0;
const KERNEL_FLOOR: f64 = 0.011_108_996_538_242_306; // exp(-4.5)

/// Truncated Gaussian kernel at squared Mahalanobis distance `m`.
#[inline]
pub fn kernel(m: f64) -> f64 {
    if m >= KERNEL_CUTOFF || m < 0.0 {
        0.0
    } else {
        ((-0.5 * m).exp() - KERNEL_FLOOR) / (1.0 - KERNEL_FLOOR)
    }
}

/// `d kernel / d m` inside the support.
#[inline]
fn kernel_slope(m: f64) -> f64 {
    if m >= KERNEL_CUTOFF || m < 0.0 {
        0.0
    } else {
        -0.5 * (-0.5 * m).exp() / (1.0 - KERNEL_FLOOR)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub tile_size: usize,
    /// Stop compositing a pixel once its transmittance falls below this.
    pub early_stop: f64,
    /// Isotropic dilation added to every screen-space covariance (px²).
    pub cov_dilation: f64,
    pub near: f64,
    /// Pixels with accumulated alpha below this have no valid orientation.
    pub alpha_valid: f64,
    pub background: [f64; 3],
    /// Orientation maps by compositing instead of max contribution.
    pub composited_orientation: bool,
    pub exec: Exec,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            tile_size: 16,
            early_stop: 1e-4,
            cov_dilation: 0.3,
            near: 1e-3,
            alpha_valid: 0.01,
            background: [0.0; 3],
            composited_orientation: false,
            exec: Exec::default(),
        }
    }
}

/// Which Gaussian a primitive came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Hair { strand: u32, segment: u32 },
    Head(u32),
    Free(u32),
}

/// A 3D Gaussian ready for projection.
#[derive(Clone, Debug)]
pub struct Primitive<'a> {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
    pub opacity: f64,
    /// Fiber direction (zero for non-fiber Gaussians).
    pub direction: Vec3,
    pub sh: &'a [[f64; 3]],
    pub source: Source,
}

#[derive(Clone, Debug, Default)]
pub struct PrimitiveSet<'a> {
    pub prims: Vec<Primitive<'a>>,
    pub sh_degree: usize,
}

impl<'a> PrimitiveSet<'a> {
    /// All hair segments in strand order, followed by the head Gaussians
    /// when `with_head` is set.
    pub fn from_model(model: &'a HairModel, with_head: bool) -> Self {
        let mut prims = Vec::with_capacity(model.segment_count() + model.head.len());
        for (si, strand) in model.strands.iter().enumerate() {
            for (j, (g, mean)) in strand.segments.iter().zip(strand.centers()).enumerate() {
                let direction = g.direction();
                prims.push(Primitive {
                    mean,
                    cov: crate::model::cylinder_covariance(&direction, g.diameter, g.length),
                    opacity: g.opacity(),
                    direction,
                    sh: &g.sh,
                    source: Source::Hair {
                        strand: si as u32,
                        segment: j as u32,
                    },
                });
            }
        }
        if with_head {
            for (i, h) in model.head.iter().enumerate() {
                prims.push(Primitive {
                    mean: h.mean,
                    cov: h.covariance(),
                    opacity: h.opacity(),
                    direction: Vec3::zeros(),
                    sh: &h.sh,
                    source: Source::Head(i as u32),
                });
            }
        }
        Self {
            prims,
            sh_degree: model.sh_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.prims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }
}

/// What each splat deposits into the color channels.
#[derive(Clone, Copy, Debug)]
pub enum Payload<'a> {
    ShColor,
    /// Image-plane fiber direction, upper-half-plane canonical.
    Orientation,
    /// Per-primitive RGB (e.g. shaded radiance).
    Radiance(&'a [[f64; 3]]),
    AlphaOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splat2D {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub conic: Matrix2<f64>,
    /// Camera-space z of the center.
    pub depth: f64,
    pub opacity: f64,
    pub payload: [f64; 3],
    /// Index into the primitive set.
    pub source_id: usize,
    pub cam_mean: Vec3,
    /// Half extents of the 3σ box.
    pub extent: Vector2<f64>,
    /// Channels whose SH color was clamped at zero.
    pub clamped: [bool; 3],
}

impl Splat2D {
    /// Squared Mahalanobis distance of pixel `(x, y)` and its offset.
    #[inline]
    pub fn mahalanobis(&self, x: f64, y: f64) -> (f64, Vector2<f64>) {
        let d = Vector2::new(x - self.mean.x, y - self.mean.y);
        let m = d.x * (self.conic[(0, 0)] * d.x + self.conic[(0, 1)] * d.y)
            + d.y * (self.conic[(1, 0)] * d.x + self.conic[(1, 1)] * d.y);
        (m, d)
    }

    #[inline]
    pub fn kernel_at(&self, x: f64, y: f64) -> f64 {
        kernel(self.mahalanobis(x, y).0)
    }
}

/// Jacobian of the perspective map at camera-space point `t`.
pub fn projection_jacobian(cam: &CameraView, t: &Vec3) -> Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * t.x * iz * iz,
        0.0,
        cam.fy * iz,
        -cam.fy * t.y * iz * iz,
    )
}

/// Screen-space footprint of a Gaussian: `Σ' = J W Σ W^T J^T + ε I`. Returns
/// `None` when the center is behind the near plane or the 3σ box misses the
/// image.
pub fn project(
    mean: &Vec3,
    cov: &Matrix3<f64>,
    cam: &CameraView,
    cfg: &RenderConfig,
) -> Option<(Vector2<f64>, Matrix2<f64>, Vec3)> {
    let t = cam.to_camera(mean);
    if !(t.z > cfg.near) {
        return None;
    }
    let mean2d = cam.project_camera(&t);
    let jw = projection_jacobian(cam, &t) * cam.rotation();
    let cov2d = jw * cov * jw.transpose() + Matrix2::identity() * cfg.cov_dilation;
    let ex = 3.0 * cov2d[(0, 0)].sqrt();
    let ey = 3.0 * cov2d[(1, 1)].sqrt();
    let (w, h) = (cam.width as f64, cam.height as f64);
    if mean2d.x + ex < 0.0 || mean2d.x - ex > w - 1.0 || mean2d.y + ey < 0.0 || mean2d.y - ey > h - 1.0 {
        return None;
    }
    if !(mean2d.x.is_finite() && mean2d.y.is_finite()) {
        return None;
    }
    Some((mean2d, cov2d, t))
}

/// Unit image-plane direction of a fiber at camera-space point `t`,
/// flipped into the upper half-plane (`y > 0`, or `y == 0` and `x ≥ 0`).
/// Returns `None` for fibers pointing along the view ray.
pub fn image_direction(cam: &CameraView, t: &Vec3, world_dir: &Vec3) -> Option<Vector2<f64>> {
    let raw = projection_jacobian(cam, t) * (cam.rotation() * world_dir);
    let n = raw.norm();
    if n < 1e-12 {
        return None;
    }
    Some(canonical_orientation(raw / n))
}

pub fn canonical_orientation(v: Vector2<f64>) -> Vector2<f64> {
    if v.y < 0.0 || (v.y == 0.0 && v.x < 0.0) {
        -v
    } else {
        v
    }
}

/// Project all primitives and attach payloads. Culled primitives are
/// dropped; `Splat2D::source_id` indexes back into `set`.
pub fn project_all(
    set: &PrimitiveSet<'_>,
    cam: &CameraView,
    payload: Payload<'_>,
    cfg: &RenderConfig,
) -> Vec<Splat2D> {
    let center = cam.center();
    let projected = cfg.exec.map(set.len(), |i| {
        let p = &set.prims[i];
        let (mean2d, cov2d, t) = project(&p.mean, &p.cov, cam, cfg)?;
        let conic = cov2d.try_inverse()?;
        let mut clamped = [false; 3];
        let payload = match payload {
            Payload::ShColor => {
                let v = p.mean - center;
                let (c, cl) = sh::eval(p.sh, set.sh_degree, &(v / v.norm()));
                clamped = cl;
                c
            }
            Payload::Orientation => match image_direction(cam, &t, &p.direction) {
                Some(d) => [d.x, d.y, 0.0],
                None => [0.0; 3],
            },
            Payload::Radiance(r) => r[i],
            Payload::AlphaOnly => [0.0; 3],
        };
        Some(Splat2D {
            mean: mean2d,
            cov: cov2d,
            conic,
            depth: t.z,
            opacity: p.opacity,
            payload,
            source_id: i,
            cam_mean: t,
            extent: Vector2::new(3.0 * cov2d[(0, 0)].sqrt(), 3.0 * cov2d[(1, 1)].sqrt()),
            clamped,
        })
    });
    projected.into_iter().flatten().collect()
}

/// Everything a backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub splats: Vec<Splat2D>,
    pub bins: TileBins,
    pub frame: FrameBuffer,
    pub generation: u64,
    pub background: [f64; 3],
    pub early_stop: f64,
}

/// Full forward render of a primitive set.
pub fn render(
    set: &PrimitiveSet<'_>,
    cam: &CameraView,
    payload: Payload<'_>,
    cfg: &RenderConfig,
) -> ForwardPass {
    let splats = project_all(set, cam, payload, cfg);
    let bins = TileBins::build(&splats, cam.width as usize, cam.height as usize, cfg.tile_size, cfg.exec);
    let frame = tiles::composite(&splats, &bins, cfg);
    ForwardPass {
        splats,
        bins,
        frame,
        generation: 0,
        background: cfg.background,
        early_stop: cfg.early_stop,
    }
}

/// Render a hair model (hair plus head Gaussians).
pub fn render_model(model: &HairModel, cam: &CameraView, payload: Payload<'_>, cfg: &RenderConfig) -> ForwardPass {
    let set = PrimitiveSet::from_model(model, true);
    let mut fwd = render(&set, cam, payload, cfg);
    fwd.generation = model.generation;
    fwd
}

/// Orientation map: per pixel, the image-plane direction of the Gaussian
/// with the largest contribution (or the normalized composite when
/// `cfg.composited_orientation` is set). Pixels with alpha below
/// `cfg.alpha_valid` are invalid and hold `(0, 0)`.
pub fn render_orientation(set: &PrimitiveSet<'_>, cam: &CameraView, cfg: &RenderConfig) -> (OrientationImage, ForwardPass) {
    let fwd = render(set, cam, Payload::Orientation, cfg);
    let n = cam.pixel_count();
    let mut img = OrientationImage::new(cam.width, cam.height);
    for px in 0..n {
        if fwd.frame.alpha[px] < cfg.alpha_valid {
            continue;
        }
        let v = if cfg.composited_orientation {
            let c = fwd.frame.color[px];
            Vector2::new(c[0], c[1])
        } else {
            let top = fwd.frame.top[px];
            if top == NO_SPLAT {
                continue;
            }
            let p = fwd.splats[top as usize].payload;
            Vector2::new(p[0], p[1])
        };
        let len = v.norm();
        if len < 1e-12 {
            continue;
        }
        let v = canonical_orientation(v / len);
        img.dir[px] = [v.x, v.y];
        img.confidence[px] = 1.0;
        img.valid[px] = true;
    }
    (img, fwd)
}

#[cfg(test)]
mod tests;
