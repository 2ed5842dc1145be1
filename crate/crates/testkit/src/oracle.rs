use ghair_core::camera::CameraView;
use ghair_core::math::Vec3;
use ghair_core::model::HairModel;
use ghair_core::raster::{self, LightPassConfig, PrimitiveSet, RenderConfig};
use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};

#[derive(Clone, Debug)]
pub struct RefGaussian {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
    pub opacity: f64,
    pub color: [f64; 3],
}

/// One Gaussian after projection, in the notation of the splatting
/// literature.
#[derive(Clone, Debug)]
pub struct RefSplat {
    pub index: usize,
    pub depth: f64,
    pub center: Vector2<f64>,
    pub conic: Matrix2<f64>,
    pub opacity: f64,
    pub color: [f64; 3],
}

pub fn truncated_kernel(m: f64) -> f64 {
    let floor = (-4.5f64).exp();
    if (0.0..9.0).contains(&m) {
        ((-0.5 * m).exp() - floor) / (1.0 - floor)
    } else {
        0.0
    }
}

pub fn project(g: &RefGaussian, index: usize, cam: &CameraView, dilation: f64, near: f64) -> Option<RefSplat> {
    let w = cam.world_to_camera;
    let r = Matrix3::from_fn(|i, j| w[(i, j)]);
    let t = r * g.mean + Vec3::new(w[(0, 3)], w[(1, 3)], w[(2, 3)]);
    if t.z <= near {
        return None;
    }
    let j = Matrix2x3::new(
        cam.fx / t.z,
        0.0,
        -cam.fx * t.x / (t.z * t.z),
        0.0,
        cam.fy / t.z,
        -cam.fy * t.y / (t.z * t.z),
    );
    let c = j * r * g.cov * r.transpose() * j.transpose();
    let (a, b, d) = (c[(0, 0)] + dilation, c[(0, 1)], c[(1, 1)] + dilation);
    let det = a * d - b * b;
    if det <= 0.0 {
        return None;
    }
    Some(RefSplat {
        index,
        depth: t.z,
        center: Vector2::new(cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy),
        conic: Matrix2::new(d / det, -b / det, -b / det, a / det),
        opacity: g.opacity,
        color: g.color,
    })
}

impl RefSplat {
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let v = Vector2::new(x, y) - self.center;
        truncated_kernel((v.transpose() * self.conic * v)[(0, 0)])
    }
}

/// Projected splats in global front-to-back order (ties by index).
pub fn sorted_splats(gs: &[RefGaussian], cam: &CameraView, dilation: f64, near: f64) -> Vec<RefSplat> {
    let mut s: Vec<RefSplat> = gs
        .iter()
        .enumerate()
        .filter_map(|(i, g)| project(g, i, cam, dilation, near))
        .collect();
    s.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    s
}

/// Every pixel composited independently over the globally sorted list.
pub fn render(gs: &[RefGaussian], cam: &CameraView, cfg: &RenderConfig) -> (Vec<[f64; 3]>, Vec<f64>) {
    let splats = sorted_splats(gs, cam, cfg.cov_dilation, cfg.near);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut color = Vec::with_capacity(w * h);
    let mut alpha = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut t = 1.0;
            let mut c = [0.0; 3];
            for s in &splats {
                let g = s.kernel(x as f64, y as f64);
                if g <= 0.0 {
                    continue;
                }
                let a = s.opacity * g;
                for ch in 0..3 {
                    c[ch] += t * a * s.color[ch];
                }
                t *= 1.0 - a;
                if t < cfg.early_stop {
                    break;
                }
            }
            for ch in 0..3 {
                c[ch] += t * cfg.background[ch];
            }
            color.push(c);
            alpha.push(1.0 - t);
        }
    }
    (color, alpha)
}

/// Borrowed view of reference Gaussians for the production renderer.
pub fn as_primitives(gs: &[RefGaussian]) -> (PrimitiveSet<'static>, Vec<[f64; 3]>) {
    static DC: [[f64; 3]; 1] = [[0.0; 3]];
    let prims = gs
        .iter()
        .enumerate()
        .map(|(i, g)| raster::Primitive {
            mean: g.mean,
            cov: g.cov,
            opacity: g.opacity,
            direction: Vec3::zeros(),
            sh: &DC,
            source: raster::Source::Free(i as u32),
        })
        .collect();
    (PrimitiveSet { prims, sh_degree: 0 }, gs.iter().map(|g| g.color).collect())
}

/// Rounding allowance between the replayed and the stored products.
const ULP_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub struct RayReport {
    /// Light rays with at least one responsible Gaussian.
    pub rays: usize,
    /// Rays whose per-ray transmittances at responsible Gaussians increase
    /// somewhere with depth.
    pub ray_violations: usize,
    /// Rays on which the stored (min-combined) τ increases with depth.
    pub stored_violations: usize,
    /// Responsible Gaussians whose stored τ exceeds the ray transmittance
    /// in front of them.
    pub above_ray: usize,
}

/// Replays every light ray directly and checks the stored transmittances.
pub fn light_rays(model: &HairModel, light: &Vec3, cfg: &LightPassConfig, tau: &[f64]) -> RayReport {
    let (center, radius) = model.hair_bounding_sphere().expect("non-empty model");
    let cam = raster::light_camera(light, &center, radius, cfg.resolution).expect("light outside");
    let set = PrimitiveSet::from_model(model, false);
    let gs: Vec<RefGaussian> = set
        .prims
        .iter()
        .map(|p| RefGaussian {
            mean: p.mean,
            cov: p.cov,
            opacity: p.opacity,
            color: [0.0; 3],
        })
        .collect();
    let rcfg = RenderConfig {
        cov_dilation: cfg.cov_dilation,
        ..RenderConfig::default()
    };
    let splats = sorted_splats(&gs, &cam, rcfg.cov_dilation, rcfg.near);
    let mut rep = RayReport::default();
    let n = cam.width as usize;
    for y in 0..cam.height as usize {
        for x in 0..n {
            let mut t = 1.0;
            let mut seq: Vec<(f64, f64)> = Vec::new();
            for s in &splats {
                let g = s.kernel(x as f64, y as f64);
                if g <= 0.0 {
                    continue;
                }
                if g > cfg.threshold {
                    seq.push((t, tau[s.index]));
                }
                t *= 1.0 - s.opacity * g;
            }
            if seq.is_empty() {
                continue;
            }
            rep.rays += 1;
            if seq.windows(2).any(|w| w[1].0 > w[0].0 + ULP_SLACK) {
                rep.ray_violations += 1;
            }
            if seq.windows(2).any(|w| w[1].1 > w[0].1 + ULP_SLACK) {
                rep.stored_violations += 1;
            }
            rep.above_ray += seq.iter().filter(|(ray, stored)| *stored > ray + ULP_SLACK).count();
        }
    }
    rep
}
