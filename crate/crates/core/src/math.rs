//! Small numeric helpers shared across modules.
//!
//! Quaternions are stored as `[w, x, y, z]` and are not assumed normalized:
//! every accessor normalizes first, and the gradient helpers differentiate
//! through that normalization.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Quat = [f64; 4];

pub const IDENTITY_QUAT: Quat = [1.0, 0.0, 0.0, 0.0];

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`]; the input is clamped away from 0 and 1.
#[inline]
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

pub fn quat_norm(q: &Quat) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

pub fn quat_normalize(q: &Quat) -> Quat {
    let n = quat_norm(q);
    if n == 0.0 || !n.is_finite() {
        return IDENTITY_QUAT;
    }
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

pub fn rotation_matrix(q: &Quat) -> Matrix3<f64> {
    let [w, x, y, z] = quat_normalize(q);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Third column of the rotation matrix: the image of +z.
pub fn quat_axis_z(q: &Quat) -> Vec3 {
    let [w, x, y, z] = quat_normalize(q);
    Vec3::new(
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Gradient with respect to the raw (unnormalized) quaternion of
/// `g · quat_axis_z(q)`.
pub fn quat_axis_z_grad(q: &Quat, g: &Vec3) -> Quat {
    let n = quat_norm(q);
    let [w, x, y, z] = quat_normalize(q);
    let gw = g.x * 2.0 * y - g.y * 2.0 * x;
    let gx = g.x * 2.0 * z - g.y * 2.0 * w - g.z * 4.0 * x;
    let gy = g.x * 2.0 * w + g.y * 2.0 * z - g.z * 4.0 * y;
    let gz = g.x * 2.0 * x + g.y * 2.0 * y;
    let dot = w * gw + x * gx + y * gy + z * gz;
    [
        (gw - w * dot) / n,
        (gx - x * dot) / n,
        (gy - y * dot) / n,
        (gz - z * dot) / n,
    ]
}

/// Minimal-angle rotation taking +z onto the unit vector `d`.
pub fn quat_from_z_to(d: &Vec3) -> Quat {
    let d = d.normalize();
    let w = 1.0 + d.z;
    if w < 1e-12 {
        // Antiparallel: any half turn about an axis perpendicular to z.
        return [0.0, 1.0, 0.0, 0.0];
    }
    quat_normalize(&[w, -d.y, d.x, 0.0])
}

/// Rotation quaternion for a rotation matrix (Shepperd's method).
pub fn quat_from_matrix(m: &Matrix3<f64>) -> Quat {
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        ]
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        ]
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        [
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        [
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    quat_normalize(&q)
}

/// Hamilton product `a * b`.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Some unit vector perpendicular to `v`.
pub fn any_perpendicular(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&a).normalize()
}

/// Rotate the unit vector `d` by `angle` radians about a perpendicular axis
/// picked by `spin` (radians around `d`).
pub fn tilt(d: &Vec3, angle: f64, spin: f64) -> Vec3 {
    let e1 = any_perpendicular(d);
    let e2 = d.cross(&e1);
    let axis = e1 * spin.cos() + e2 * spin.sin();
    (d * angle.cos() + axis * angle.sin()).normalize()
}
