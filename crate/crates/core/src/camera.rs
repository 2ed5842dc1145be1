use nalgebra::{Matrix3, Matrix4, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Pinhole camera. Camera space is x right, y down, z forward; pixel
/// `(i, j)` is sampled at image coordinate `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub world_to_camera: Matrix4<f64>,
}

/// Largest tolerated `|R^T R - I|` entry.
pub const RIGIDITY_TOLERANCE: f64 = 1e-6;

impl CameraView {
    pub fn rotation(&self) -> Matrix3<f64> {
        self.world_to_camera.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vec3 {
        self.world_to_camera.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vec3 {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.translation()
    }

    /// Pixel coordinates of a camera-space point (no depth check).
    pub fn project_camera(&self, t: &Vec3) -> Vector2<f64> {
        Vector2::new(self.fx * t.x / t.z + self.cx, self.fy * t.y / t.z + self.cy)
    }

    /// Pixel coordinates of a world point in front of the camera.
    pub fn project(&self, p: &Vec3) -> Option<Vector2<f64>> {
        let t = self.to_camera(p);
        (t.z > 0.0).then(|| self.project_camera(&t))
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn rigidity_residual(&self) -> f64 {
        let r = self.rotation();
        let bottom = self.world_to_camera.fixed_view::<1, 4>(3, 0);
        let bottom_err = (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs())
            .max(0.0);
        (r.transpose() * r - Matrix3::identity()).abs().max().max(bottom_err)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            return Err(Error::InvalidCamera(format!("fx must be positive, got {}", self.fx)));
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::InvalidCamera(format!("fy must be positive, got {}", self.fy)));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidCamera("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera(format!(
                "image size must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !self.world_to_camera.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("world_to_camera must be finite".into()));
        }
        let res = self.rigidity_residual();
        if res > RIGIDITY_TOLERANCE {
            return Err(Error::NonRigid(res));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, `up` roughly towards image top,
    /// with vertical field of view `fovy` (radians) and centered principal
    /// point.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fovy: f64, width: u32, height: u32) -> Self {
        let f = (target - eye).normalize();
        let mut right = f.cross(&up);
        if right.norm() < 1e-12 {
            right = f.cross(&crate::math::any_perpendicular(&f));
        }
        let right = right.normalize();
        let down = f.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), f.transpose()]);
        let t = -(r * eye);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let focal = 0.5 * height as f64 / (0.5 * fovy).tan();
        Self {
            id: 0,
            width,
            height,
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) * 0.5,
            cy: (height as f64 - 1.0) * 0.5,
            world_to_camera: m,
        }
    }

    /// Same pose with the image resampled by `factor` (intrinsics scaled).
    pub fn rescaled(&self, factor: f64) -> Self {
        let w = ((self.width as f64 * factor).round() as u32).max(1);
        let h = ((self.height as f64 * factor).round() as u32).max(1);
        let sx = w as f64 / self.width as f64;
        let sy = h as f64 / self.height as f64;
        Self {
            width: w,
            height: h,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: (self.cx + 0.5) * sx - 0.5,
            cy: (self.cy + 0.5) * sy - 0.5,
            ..self.clone()
        }
    }
}

/// Ring of cameras around `target` at the given elevation (radians).
pub fn orbit_ring(
    target: Vec3,
    distance: f64,
    elevation: f64,
    count: usize,
    fovy: f64,
    width: u32,
    height: u32,
) -> Vec<CameraView> {
    (0..count)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            let eye = target
                + Vec3::new(
                    distance * elevation.cos() * az.sin(),
                    distance * elevation.sin(),
                    distance * elevation.cos() * az.cos(),
                );
            let mut cam = CameraView::look_at(eye, target, Vec3::y(), fovy, width, height);
            cam.id = i as u64;
            cam
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct CameraRecord {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub world_to_camera: Vec<f64>,
}
