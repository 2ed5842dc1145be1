//! Fiber scattering: a three-lobe (R, TT, TRT) hair BSDF factored into
//! longitudinal and azimuthal terms, a pseudo-normal local scattering term,
//! and per-Gaussian shading with light transmittance.
//!
//! Closed forms are written out in `docs/scattering.md`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::{CylindricalGaussian, HairModel, ScatterParams};
use crate::raster::{self, FrameBuffer, LightPassConfig, Payload, PrimitiveSet, RenderConfig};
use crate::sh;

/// Rec.709 luma weights.
pub const LUMINANCE: [f64; 3] = [0.2126, 0.7152, 0.0722];
/// Tolerance on `|d·ω|` below 1 for a usable pseudo-normal.
pub const PARALLEL_EPS: f64 = 1e-6;
const MIN_COS_THETA_D: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSource {
    pub position: [f64; 3],
    pub intensity: [f64; 3],
}

impl LightSource {
    pub fn new(position: Vec3, intensity: [f64; 3]) -> Self {
        Self {
            position: [position.x, position.y, position.z],
            intensity,
        }
    }

    pub fn pos(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn validate(&self) -> Result<()> {
        if self.position.iter().chain(&self.intensity).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("light values must be finite".into()));
        }
        if self.intensity.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParam("light intensity must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberAngles {
    pub theta_i: f64,
    pub theta_o: f64,
    /// `φ_o − φ_i`, wrapped to (−π, π].
    pub phi: f64,
    pub theta_h: f64,
    pub theta_d: f64,
}

impl FiberAngles {
    pub fn new(theta_i: f64, theta_o: f64, phi: f64) -> Self {
        Self {
            theta_i,
            theta_o,
            phi: wrap_angle(phi),
            theta_h: 0.5 * (theta_i + theta_o),
            theta_d: 0.5 * (theta_i - theta_o),
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Azimuth reference axis perpendicular to `d`: world up rejected from the
/// fiber, or world x when the fiber is vertical.
pub fn azimuth_frame(d: &Vec3) -> (Vec3, Vec3) {
    let reject = |a: Vec3| a - d * d.dot(&a);
    let mut v = reject(Vec3::new(0.0, 1.0, 0.0));
    if v.norm() < 1e-6 {
        v = reject(Vec3::new(1.0, 0.0, 0.0));
    }
    let v = v.normalize();
    (v, d.cross(&v))
}

pub fn fiber_angles(d: &Vec3, wi: &Vec3, wo: &Vec3) -> FiberAngles {
    let (v, w) = azimuth_frame(d);
    let theta = |x: &Vec3| x.dot(d).clamp(-1.0, 1.0).asin();
    let phi = |x: &Vec3| x.dot(&w).atan2(x.dot(&v));
    FiberAngles::new(theta(wi), theta(wo), phi(wo) - phi(wi))
}

/// Schlick Fresnel for a dielectric of index `eta`.
pub fn fresnel(eta: f64, cos_theta: f64) -> f64 {
    let f0 = ((1.0 - eta) / (1.0 + eta)).powi(2);
    f0 + (1.0 - f0) * (1.0 - cos_theta.clamp(0.0, 1.0)).powi(5)
}

/// Lobe centers (R, TT, TRT) for highlight shift `beta`.
pub fn lobe_shifts(beta: f64) -> [f64; 3] {
    [-0.5 * beta, 0.25 * beta, beta]
}

/// Lobe widths (R, TT, TRT) for roughness `r`.
pub fn lobe_widths(r: f64) -> [f64; 3] {
    let r2 = (r * r).max(1e-6);
    [r2, 0.5 * r2, 2.0 * r2]
}

/// Unit-height longitudinal lobes `M_t(θ_h)`.
pub fn longitudinal(theta_h: f64, params: &ScatterParams) -> [f64; 3] {
    let c = lobe_shifts(params.shift);
    let b = lobe_widths(params.roughness);
    std::array::from_fn(|t| (-0.5 * ((theta_h - c[t]) / b[t]).powi(2)).exp())
}

/// Azimuthal terms `N_t(θ_d, φ)` per lobe and channel.
pub fn azimuthal(theta_d: f64, phi: f64, eta: f64, base: [f64; 3]) -> [[f64; 3]; 3] {
    let cd = theta_d.cos().max(MIN_COS_THETA_D);
    let cos_phi = phi.cos();
    let cos_half = (0.5 + 0.5 * cos_phi).max(0.0).sqrt();

    let n_r = 0.25 * cos_half * fresnel(eta, cd * cos_half);

    let n_prime = 1.19 / cd + 0.36 * cd;
    let a = 1.0 / n_prime;
    let h = cos_half * (1.0 + a * (0.6 - 0.8 * cos_phi));
    let f_tt = fresnel(eta, cd * (1.0 - h * h).max(0.0).sqrt());
    let exp_tt = 0.5 * (1.0 - (h * a).powi(2)).max(0.0).sqrt() / cd;
    let np_tt = (-3.65 * cos_phi - 3.98).exp() * (1.0 - f_tt).powi(2);

    let f_trt = fresnel(eta, cd * 0.5);
    let exp_trt = 0.8 / cd;
    let np_trt = (17.0 * cos_phi - 16.78).exp() * (1.0 - f_trt).powi(2) * f_trt;

    let absorb = |b: f64, e: f64| if b <= 0.0 { 0.0 } else { b.powf(e) };
    [
        [n_r; 3],
        std::array::from_fn(|ch| np_tt * absorb(base[ch], exp_tt)),
        std::array::from_fn(|ch| np_trt * absorb(base[ch], exp_trt)),
    ]
}

/// Per-lobe RGB contributions `M_t N_t`, before lobe multipliers.
pub fn bsdf_lobes(angles: &FiberAngles, params: &ScatterParams, base: [f64; 3]) -> [[f64; 3]; 3] {
    let m = longitudinal(angles.theta_h, params);
    let n = azimuthal(angles.theta_d, angles.phi, params.eta, base);
    std::array::from_fn(|t| std::array::from_fn(|ch| m[t] * n[t][ch]))
}

pub fn bsdf(angles: &FiberAngles, params: &ScatterParams, base: [f64; 3]) -> [f64; 3] {
    let lobes = bsdf_lobes(angles, params, base);
    std::array::from_fn(|ch| (0..3).map(|t| params.lobe_scale[t] * lobes[t][ch]).sum())
}

/// Normal of the cylinder facing `wo`: `wo` with its component along `d`
/// removed, normalized.
pub fn pseudo_normal(d: &Vec3, wo: &Vec3) -> Result<Vec3> {
    let along = d.dot(wo);
    if along.abs() >= 1.0 - PARALLEL_EPS {
        return Err(Error::DegenerateDirection);
    }
    let n = wo - d * along;
    let len = n.norm();
    if len < 1e-12 {
        return Err(Error::DegenerateDirection);
    }
    Ok(n / len)
}

pub fn luminance(c: [f64; 3]) -> f64 {
    LUMINANCE[0] * c[0] + LUMINANCE[1] * c[1] + LUMINANCE[2] * c[2]
}

/// Local multiple-scattering term `√b (n·ω_i + 1)/(4π) (b / L(b))^τ`.
pub fn local_scatter(base: [f64; 3], n: &Vec3, wi: &Vec3, tau: f64) -> [f64; 3] {
    let lum = luminance(base);
    if lum <= 0.0 {
        return [0.0; 3];
    }
    let cos = n.dot(wi);
    std::array::from_fn(|ch| {
        let b = base[ch].max(0.0);
        let power = if tau == 0.0 {
            1.0
        } else if b == 0.0 {
            0.0
        } else {
            (b / lum).powf(tau)
        };
        b.sqrt() * (cos + 1.0) / (4.0 * PI) * power
    })
}

/// Outgoing radiance of one segment centered at `center` toward `wo`
/// (unit, pointing from the segment to the viewer). `taus[k]` is the
/// segment's transmittance toward light `k`.
pub fn shade_gaussian(
    g: &CylindricalGaussian,
    center: &Vec3,
    wo: &Vec3,
    lights: &[LightSource],
    taus: &[f64],
    params: &ScatterParams,
) -> [f64; 3] {
    let d = g.direction();
    let base = g.base_color();
    let normal = pseudo_normal(&d, wo).ok();
    let mut out = [0.0; 3];
    for (light, &tau) in lights.iter().zip(taus) {
        let to_light = light.pos() - center;
        let dist = to_light.norm();
        if dist <= 0.0 {
            continue;
        }
        let wi = to_light / dist;
        let s = bsdf(&fiber_angles(&d, &wi, wo), params, base);
        let local = normal.map_or([0.0; 3], |n| local_scatter(base, &n, &wi, tau));
        for ch in 0..3 {
            out[ch] += (s[ch] + local[ch]) * tau * light.intensity[ch];
        }
    }
    out
}

/// Per-light transmittance of every hair segment, computed once for a
/// fixed light rig and reused across views.
#[derive(Clone, Debug, Default)]
pub struct LightRig {
    pub lights: Vec<LightSource>,
    /// `taus[k][i]`: segment `i` (strand-major) toward light `k`.
    pub taus: Vec<Vec<f64>>,
}

impl LightRig {
    pub fn compute(model: &HairModel, lights: &[LightSource], cfg: &LightPassConfig) -> Result<Self> {
        let mut taus = Vec::with_capacity(lights.len());
        for l in lights {
            l.validate()?;
            taus.push(raster::hair_transmittance(model, &l.pos(), cfg)?);
        }
        Ok(Self {
            lights: lights.to_vec(),
            taus,
        })
    }

    /// Transmittance column for segment `i`.
    pub fn taus_of(&self, i: usize) -> Vec<f64> {
        self.taus.iter().map(|t| t.get(i).copied().unwrap_or(1.0)).collect()
    }
}

/// Radiance payload for every primitive of `PrimitiveSet::from_model(model,
/// true)` seen from `eye`. Hair segments are shaded; head Gaussians keep
/// their view-dependent SH color.
pub fn shade_model(model: &HairModel, eye: &Vec3, rig: &LightRig, params: &ScatterParams, exec: crate::exec::Exec) -> Vec<[f64; 3]> {
    let mut index = Vec::with_capacity(model.segment_count());
    for strand in &model.strands {
        for (g, c) in strand.segments.iter().zip(strand.centers()) {
            index.push((g, c));
        }
    }
    let mut out = exec.map(index.len(), |i| {
        let (g, c) = index[i];
        let v = eye - c;
        let n = v.norm();
        if n <= 0.0 {
            return [0.0; 3];
        }
        shade_gaussian(g, &c, &(v / n), &rig.lights, &rig.taus_of(i), params)
    });
    for h in &model.head {
        let v = h.mean - eye;
        let n = v.norm().max(1e-12);
        out.push(sh::eval(&h.sh, model.sh_degree, &(v / n)).0);
    }
    out
}

/// Render the model under point lights.
pub fn relight(
    model: &HairModel,
    cam: &CameraView,
    rig: &LightRig,
    params: &ScatterParams,
    cfg: &RenderConfig,
) -> Result<FrameBuffer> {
    params.validate()?;
    let radiance = shade_model(model, &cam.center(), rig, params, cfg.exec);
    let set = PrimitiveSet::from_model(model, true);
    Ok(raster::render(&set, cam, Payload::Radiance(&radiance), cfg).frame)
}
