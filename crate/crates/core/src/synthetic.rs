//! Procedural test scenes: a spherical head with a wig of falling strands,
//! and simple analytic orientation fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{orbit_ring, CameraView};
use crate::field::OrientedField;
use crate::math::{self, Vec3};
use crate::mesh::TriMesh;
use crate::model::{HairModel, HairStrand, HeadGaussian};
use crate::raster::{render_model, Payload, RenderConfig};
use crate::sh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WigConfig {
    pub strands: usize,
    pub nodes: usize,
    pub segment_length: f64,
    pub head_radius: f64,
    /// Roots lie on the part of the head above this height (fraction of
    /// the radius).
    pub scalp_height: f64,
    pub head_gaussians: usize,
    pub hair_color: [f64; 3],
    pub color_jitter: f64,
    pub opacity: [f64; 2],
    pub diameter: f64,
    pub sh_degree: usize,
    pub views: usize,
    pub width: u32,
    pub height: u32,
    pub camera_distance: f64,
    pub fovy_deg: f64,
    pub seed: u64,
}

impl Default for WigConfig {
    fn default() -> Self {
        Self {
            strands: 200,
            nodes: 16,
            segment_length: 0.012,
            head_radius: 0.1,
            scalp_height: 0.2,
            head_gaussians: 500,
            hair_color: [0.45, 0.28, 0.15],
            color_jitter: 0.12,
            opacity: [0.7, 0.95],
            diameter: crate::model::DEFAULT_DIAMETER,
            sh_degree: 0,
            views: 24,
            width: 64,
            height: 64,
            camera_distance: 0.6,
            fovy_deg: 45.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WigScene {
    pub model: HairModel,
    pub head_mesh: TriMesh,
    /// Shell around the hair volume.
    pub hair_mesh: TriMesh,
    pub cameras: Vec<CameraView>,
    pub images: Vec<Vec<[f64; 3]>>,
    pub alphas: Vec<Vec<f64>>,
}

fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            Vec3::new(r * th.cos(), y, r * th.sin())
        })
        .collect()
}

/// Flat, nearly opaque Gaussians tiling a sphere.
pub fn head_gaussians(radius: f64, count: usize, sh_degree: usize, rng: &mut ChaCha8Rng) -> Vec<HeadGaussian> {
    let spacing = radius * (4.0 * std::f64::consts::PI / count as f64).sqrt();
    let skin = [0.85, 0.64, 0.52];
    fibonacci_sphere(count)
        .into_iter()
        .map(|n| {
            let mut coeffs = vec![[0.0; 3]; sh::coeff_count(sh_degree)];
            let shade = 0.85 + 0.15 * n.y + 0.03 * rng.random::<f64>();
            for ch in 0..3 {
                coeffs[0][ch] = sh::dc_from_color((skin[ch] * shade).clamp(0.0, 1.0));
            }
            HeadGaussian {
                mean: n * radius,
                rotation: math::quat_from_z_to(&n),
                scale: Vec3::new(0.7 * spacing, 0.7 * spacing, 0.05 * spacing),
                opacity_logit: math::logit(0.98),
                sh: coeffs,
            }
        })
        .collect()
}

/// Grow one strand from `root`: start along the surface normal, bend
/// under gravity, and stay a small margin outside the head.
fn grow(root: Vec3, normal: Vec3, cfg: &WigConfig, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let margin = cfg.head_radius + 0.004;
    let mut pts = vec![root];
    let mut d = normal;
    let curl = Vec3::new(rng.random_range(-1.0..1.0), 0.0, rng.random_range(-1.0..1.0)) * 0.15;
    for _ in 1..cfg.nodes {
        d = (d + Vec3::new(0.0, -0.35, 0.0) + curl).normalize();
        let p = *pts.last().unwrap();
        let mut q = p + d * cfg.segment_length;
        if q.norm() < margin {
            q = q.normalize() * margin;
            let step = q - p;
            q = p + step.normalize() * cfg.segment_length;
            if q.norm() < margin {
                q = q.normalize() * margin;
            }
        }
        d = (q - p).normalize();
        pts.push(q);
    }
    pts
}

pub fn wig_model(cfg: &WigConfig, rng: &mut ChaCha8Rng) -> (HairModel, TriMesh, TriMesh) {
    let head_mesh = TriMesh::uv_sphere(Vec3::zeros(), cfg.head_radius, 24, 32);
    let cut = cfg.scalp_height * cfg.head_radius;
    let scalp = head_mesh.filter_triangles(|c| c.y > cut);
    let roots = scalp.sample(cfg.strands, rng);
    let mut strands = Vec::with_capacity(cfg.strands);
    for sp in roots {
        let root = sp.position;
        let normal = root.normalize();
        let pts = grow(root, normal, cfg, rng);
        let mut s = HairStrand::from_polyline(&pts, cfg.diameter, cfg.sh_degree).expect("distinct nodes");
        let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * cfg.color_jitter);
        let opacity = rng.random_range(cfg.opacity[0]..cfg.opacity[1]);
        for (j, g) in s.segments.iter_mut().enumerate() {
            let fade = 1.0 - 0.3 * j as f64 / cfg.nodes as f64;
            g.set_base_color(std::array::from_fn(|ch| ((cfg.hair_color[ch] + tint[ch]) * (0.8 + 0.2 * fade)).clamp(0.02, 0.98)));
            g.set_opacity(opacity);
        }
        strands.push(s);
    }
    let mut model = HairModel::new(strands, cfg.sh_degree, cfg.diameter);
    model.head = head_gaussians(cfg.head_radius, cfg.head_gaussians, cfg.sh_degree, rng);
    model.scalp = Some(scalp);
    let hair_mesh = TriMesh::uv_sphere(Vec3::zeros(), cfg.head_radius + 0.03, 16, 24)
        .filter_triangles(|c| c.y > -cfg.head_radius);
    (model, head_mesh, hair_mesh)
}

/// Cameras on two rings around the head.
pub fn wig_cameras(cfg: &WigConfig) -> Vec<CameraView> {
    let fovy = cfg.fovy_deg.to_radians();
    let target = Vec3::new(0.0, -0.02, 0.0);
    let upper = cfg.views / 2;
    let mut cams = orbit_ring(target, cfg.camera_distance, 0.45, upper, fovy, cfg.width, cfg.height);
    let mut lower = orbit_ring(target, cfg.camera_distance, 0.05, cfg.views - upper, fovy, cfg.width, cfg.height);
    // Offset the lower ring so the two rings interleave.
    let half_step = std::f64::consts::PI / (cfg.views - upper).max(1) as f64;
    let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), half_step);
    for c in &mut lower {
        let eye = rot * (c.center() - target) + target;
        *c = CameraView::look_at(eye, target, Vec3::y(), fovy, cfg.width, cfg.height);
    }
    cams.extend(lower);
    for (i, c) in cams.iter_mut().enumerate() {
        c.id = i as u64;
    }
    cams
}

pub fn render_views(model: &HairModel, cams: &[CameraView], rcfg: &RenderConfig) -> (Vec<Vec<[f64; 3]>>, Vec<Vec<f64>>) {
    cams.iter()
        .map(|c| {
            let f = render_model(model, c, Payload::ShColor, rcfg).frame;
            (f.color, f.alpha)
        })
        .unzip()
}

pub fn wig_scene(cfg: &WigConfig, rcfg: &RenderConfig) -> WigScene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (model, head_mesh, hair_mesh) = wig_model(cfg, &mut rng);
    let cameras = wig_cameras(cfg);
    let (images, alphas) = render_views(&model, &cameras, rcfg);
    WigScene {
        model,
        head_mesh,
        hair_mesh,
        cameras,
        images,
        alphas,
    }
}

/// Initialization for appearance recovery: every segment direction tilted
/// by `angle` (radians) about a random axis, random strand colors, default
/// opacity.
pub fn perturb(model: &HairModel, angle: f64, rng: &mut ChaCha8Rng) -> HairModel {
    let mut m = model.clone();
    for s in &mut m.strands {
        let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..0.95));
        for g in &mut s.segments {
            let d = math::tilt(&g.direction(), angle, rng.random::<f64>() * std::f64::consts::TAU);
            g.rotation = math::quat_from_z_to(&d);
            g.set_base_color(color);
            g.sh.iter_mut().skip(1).for_each(|c| *c = [0.0; 3]);
            g.set_opacity(crate::model::DEFAULT_OPACITY);
        }
    }
    m.touch();
    m
}

/// Straight vertical strands on a regular grid in the plane z = 0.
pub fn straight_wig(rows: usize, cols: usize, nodes: usize, spacing: f64, segment: f64, color: [f64; 3]) -> HairModel {
    let mut strands = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 - 0.5 * (cols - 1) as f64) * spacing;
            let z = (r as f64 - 0.5 * (rows - 1) as f64) * spacing;
            let pts: Vec<Vec3> = (0..nodes).map(|k| Vec3::new(x, 0.5 * segment * nodes as f64 - k as f64 * segment, z)).collect();
            let mut s = HairStrand::from_polyline(&pts, crate::model::DEFAULT_DIAMETER, 0).unwrap();
            for g in &mut s.segments {
                g.set_base_color(color);
                g.set_opacity(0.9);
            }
            strands.push(s);
        }
    }
    HairModel::new(strands, 0, crate::model::DEFAULT_DIAMETER)
}

/// Samples `(position, direction)` along analytic curves.
pub fn curve_field(curves: &[Vec<Vec3>], diameter: f64) -> OrientedField {
    let mut f = OrientedField::new(0, diameter);
    for c in curves {
        for w in c.windows(2) {
            let d = (w[1] - w[0]).normalize();
            let g = f.push(0.5 * (w[0] + w[1]), &d);
            g.set_base_color([0.5; 3]);
        }
    }
    f
}

/// Helix around the y axis, rising with `pitch` per turn.
pub fn helix(radius: f64, pitch: f64, turns: f64, samples: usize) -> Vec<Vec3> {
    (0..samples)
        .map(|i| {
            let t = turns * i as f64 / (samples - 1) as f64;
            let a = t * std::f64::consts::TAU;
            Vec3::new(radius * a.cos(), pitch * t, radius * a.sin())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wig_is_outside_head_and_uniform() {
        let cfg = WigConfig {
            strands: 30,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (m, head, _) = wig_model(&cfg, &mut rng);
        assert_eq!(m.nodes_per_strand(), Some(cfg.nodes));
        for s in &m.strands {
            for p in s.chain_nodes().iter().skip(1) {
                assert!(head.signed_distance(p) > 0.0);
            }
        }
    }
}
