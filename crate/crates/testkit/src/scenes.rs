use ghair_core::camera::CameraView;
use ghair_core::math::{self, Vec3};
use ghair_core::model::{HairModel, HairStrand};
use ghair_core::sh;
use nalgebra::{Matrix3, Matrix4};
use rand::Rng;

use crate::oracle::RefGaussian;

/// Camera at the origin looking down +z with a centered principal point.
pub fn pinhole(width: u32, height: u32, focal: f64) -> CameraView {
    CameraView {
        id: 0,
        width,
        height,
        fx: focal,
        fy: focal,
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        world_to_camera: Matrix4::identity(),
    }
}

pub fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let q = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    math::rotation_matrix(&q)
}

/// Anisotropic Gaussians scattered through the view frustum of
/// `pinhole(_, _, focal)` between depths 1 and 3.
pub fn random_gaussians<R: Rng>(rng: &mut R, n: usize, width: u32, height: u32, focal: f64) -> Vec<RefGaussian> {
    (0..n)
        .map(|_| {
            let z = rng.random_range(1.0..3.0);
            let x = rng.random_range(-0.6..0.6) * width as f64 / focal * z;
            let y = rng.random_range(-0.6..0.6) * height as f64 / focal * z;
            let r = random_rotation(rng);
            let s = Matrix3::from_diagonal(&Vec3::new(
                rng.random_range(0.005..0.08),
                rng.random_range(0.005..0.08),
                rng.random_range(0.001..0.03),
            ));
            RefGaussian {
                mean: Vec3::new(x, y, z),
                cov: r * s * s * r.transpose(),
                opacity: rng.random_range(0.05..0.99),
                color: [rng.random(), rng.random(), rng.random()],
            }
        })
        .collect()
}

/// Wavy strands hanging in −y in front of a camera that looks at the
/// origin from `z = -0.5` (see [`strand_camera`]). Colors stay well inside
/// (0, 1) so no SH channel is clamped.
pub fn hanging_strands<R: Rng>(rng: &mut R, strands: usize, segments: usize, sh_degree: usize, diameter: f64) -> HairModel {
    let seg = 0.18 / segments as f64;
    let list = (0..strands)
        .map(|_| {
            let mut p = Vec3::new(rng.random_range(-0.1..0.1), 0.1, rng.random_range(-0.04..0.04));
            let mut pts = vec![p];
            let mut dir = Vec3::new(rng.random_range(-0.3..0.3), -1.0, rng.random_range(-0.3..0.3)).normalize();
            for _ in 0..segments {
                dir = (dir + 0.25 * unit_vector(rng)).normalize();
                if dir.y > -0.3 {
                    dir.y = -0.3;
                    dir = dir.normalize();
                }
                p += dir * seg;
                pts.push(p);
            }
            let mut s = HairStrand::from_polyline(&pts, diameter, sh_degree).expect("distinct points");
            for g in &mut s.segments {
                g.set_opacity(rng.random_range(0.3..0.9));
                let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..0.7));
                g.set_base_color(base);
                for k in 1..g.sh.len() {
                    for ch in 0..3 {
                        g.sh[k][ch] = rng.random_range(-0.05..0.05);
                    }
                }
            }
            s
        })
        .collect();
    HairModel::new(list, sh_degree, diameter)
}

pub fn strand_camera(size: u32) -> CameraView {
    CameraView::look_at(
        Vec3::new(0.0, 0.0, -0.5),
        Vec3::zeros(),
        Vec3::y(),
        40f64.to_radians(),
        size,
        size,
    )
}

/// DC coefficients for a plain color.
pub fn dc(c: [f64; 3]) -> Vec<[f64; 3]> {
    vec![[sh::dc_from_color(c[0]), sh::dc_from_color(c[1]), sh::dc_from_color(c[2])]]
}
