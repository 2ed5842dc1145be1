//! Real spherical harmonics up to degree 3, in the ordering and sign
//! convention used by Gaussian splatting checkpoints. Colors are
//! `sum_k coeff_k * Y_k(dir) + 0.5`, clamped at zero.

use crate::math::Vec3;

pub const MAX_DEGREE: usize = 3;

pub const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of coefficients per color channel for a given degree.
pub const fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Basis values for a unit direction; entries past `coeff_count(degree)`
/// are zero.
pub fn basis(degree: usize, d: &Vec3) -> [f64; 16] {
    let mut y = [0.0; 16];
    y[0] = C0;
    if degree == 0 {
        return y;
    }
    let (x, yy, z) = (d.x, d.y, d.z);
    y[1] = -C1 * yy;
    y[2] = C1 * z;
    y[3] = -C1 * x;
    if degree == 1 {
        return y;
    }
    let (xx, y2, zz) = (x * x, yy * yy, z * z);
    y[4] = C2[0] * x * yy;
    y[5] = C2[1] * yy * z;
    y[6] = C2[2] * (2.0 * zz - xx - y2);
    y[7] = C2[3] * x * z;
    y[8] = C2[4] * (xx - y2);
    if degree == 2 {
        return y;
    }
    y[9] = C3[0] * yy * (3.0 * xx - y2);
    y[10] = C3[1] * x * yy * z;
    y[11] = C3[2] * yy * (4.0 * zz - xx - y2);
    y[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
    y[13] = C3[4] * x * (4.0 * zz - xx - y2);
    y[14] = C3[5] * z * (xx - y2);
    y[15] = C3[6] * x * (xx - 3.0 * y2);
    y
}

/// Partial derivatives of each basis function with respect to the raw
/// components of `d` (no normalization).
fn basis_jacobian(degree: usize, d: &Vec3) -> [[f64; 3]; 16] {
    let mut j = [[0.0; 3]; 16];
    if degree == 0 {
        return j;
    }
    let (x, y, z) = (d.x, d.y, d.z);
    j[1] = [0.0, -C1, 0.0];
    j[2] = [0.0, 0.0, C1];
    j[3] = [-C1, 0.0, 0.0];
    if degree == 1 {
        return j;
    }
    j[4] = [C2[0] * y, C2[0] * x, 0.0];
    j[5] = [0.0, C2[1] * z, C2[1] * y];
    j[6] = [-2.0 * C2[2] * x, -2.0 * C2[2] * y, 4.0 * C2[2] * z];
    j[7] = [C2[3] * z, 0.0, C2[3] * x];
    j[8] = [2.0 * C2[4] * x, -2.0 * C2[4] * y, 0.0];
    if degree == 2 {
        return j;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    j[9] = [C3[0] * 6.0 * x * y, C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
    j[10] = [C3[1] * y * z, C3[1] * x * z, C3[1] * x * y];
    j[11] = [
        C3[2] * (-2.0 * x * y),
        C3[2] * (4.0 * zz - xx - 3.0 * yy),
        C3[2] * 8.0 * y * z,
    ];
    j[12] = [
        C3[3] * (-6.0 * x * z),
        C3[3] * (-6.0 * y * z),
        C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
    ];
    j[13] = [
        C3[4] * (4.0 * zz - 3.0 * xx - yy),
        C3[4] * (-2.0 * x * y),
        C3[4] * 8.0 * x * z,
    ];
    j[14] = [C3[5] * 2.0 * x * z, -C3[5] * 2.0 * y * z, C3[5] * (xx - yy)];
    j[15] = [C3[6] * (3.0 * xx - 3.0 * yy), -C3[6] * 6.0 * x * y, 0.0];
    j
}

/// RGB color seen along `dir` (unit, from the camera towards the Gaussian).
/// Also returns, per channel, whether the value was clamped at zero.
pub fn eval(coeffs: &[[f64; 3]], degree: usize, dir: &Vec3) -> ([f64; 3], [bool; 3]) {
    let y = basis(degree, dir);
    let mut c = [0.5; 3];
    for (k, co) in coeffs.iter().enumerate().take(coeff_count(degree)) {
        for ch in 0..3 {
            c[ch] += co[ch] * y[k];
        }
    }
    let clamped = [c[0] < 0.0, c[1] < 0.0, c[2] < 0.0];
    for ch in 0..3 {
        if clamped[ch] {
            c[ch] = 0.0;
        }
    }
    (c, clamped)
}

/// Back-propagate a color gradient into the coefficients (accumulated into
/// `coeff_grad`) and return the gradient with respect to the *unnormalized*
/// view vector `v` whose normalization is `dir`.
pub fn eval_backward(
    coeffs: &[[f64; 3]],
    degree: usize,
    v: &Vec3,
    clamped: [bool; 3],
    color_grad: [f64; 3],
    coeff_grad: &mut [[f64; 3]],
) -> Vec3 {
    let n = v.norm();
    let dir = v / n;
    let y = basis(degree, &dir);
    let mut g = color_grad;
    for ch in 0..3 {
        if clamped[ch] {
            g[ch] = 0.0;
        }
    }
    let count = coeff_count(degree);
    for k in 0..count {
        for ch in 0..3 {
            coeff_grad[k][ch] += g[ch] * y[k];
        }
    }
    if degree == 0 {
        return Vec3::zeros();
    }
    let jac = basis_jacobian(degree, &dir);
    let mut gdir = Vec3::zeros();
    for k in 1..count {
        let s = g[0] * coeffs[k][0] + g[1] * coeffs[k][1] + g[2] * coeffs[k][2];
        gdir += Vec3::new(jac[k][0], jac[k][1], jac[k][2]) * s;
    }
    (gdir - dir * dir.dot(&gdir)) / n
}

/// DC coefficient that produces the given base color.
pub fn dc_from_color(c: f64) -> f64 {
    (c - 0.5) / C0
}

/// Base color from the DC band only, clamped to [0, 1].
pub fn dc_color(coeffs: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for ch in 0..3 {
        c[ch] = (C0 * coeffs[0][ch] + 0.5).clamp(0.0, 1.0);
    }
    c
}
