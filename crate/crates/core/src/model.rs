//! Cylindrical Gaussians, strands and hair models.
//!
//! A strand is a fixed root plus a chain of segments. Each segment stores
//! only its orientation, length, opacity and color; segment centers are
//! derived by walking the chain, so consecutive segments always share an
//! endpoint.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Quat, Vec3};
use crate::mesh::TriMesh;
use crate::sh;

/// Segment cross-section used throughout (scene units).
pub const DEFAULT_DIAMETER: f64 = 1.0e-4;
pub const DEFAULT_OPACITY: f64 = 0.5;
/// Upper bound on nodes per traced strand.
pub const MAX_NODES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct CylindricalGaussian {
    /// Frame whose third column is the segment direction.
    pub rotation: Quat,
    pub length: f64,
    pub diameter: f64,
    /// Pre-sigmoid opacity.
    pub opacity_logit: f64,
    /// `coeff_count(degree)` RGB triples.
    pub sh: Vec<[f64; 3]>,
    /// Cached light transmittance from the last light pass.
    pub tau: f64,
}

impl CylindricalGaussian {
    pub fn new(direction: &Vec3, length: f64, diameter: f64, sh_degree: usize) -> Self {
        Self {
            rotation: math::quat_from_z_to(direction),
            length,
            diameter,
            opacity_logit: math::logit(DEFAULT_OPACITY),
            sh: vec![[0.0; 3]; sh::coeff_count(sh_degree)],
            tau: 1.0,
        }
    }

    pub fn direction(&self) -> Vec3 {
        math::quat_axis_z(&self.rotation)
    }

    pub fn opacity(&self) -> f64 {
        math::sigmoid(self.opacity_logit)
    }

    pub fn set_opacity(&mut self, alpha: f64) {
        self.opacity_logit = math::logit(alpha);
    }

    /// `R S S^T R^T` with `S = diag(d, d, s)`.
    pub fn covariance(&self) -> Matrix3<f64> {
        cylinder_covariance(&self.direction(), self.diameter, self.length)
    }

    /// Base color: the DC band clamped to [0, 1].
    pub fn base_color(&self) -> [f64; 3] {
        sh::dc_color(&self.sh)
    }

    pub fn set_base_color(&mut self, rgb: [f64; 3]) {
        for ch in 0..3 {
            self.sh[0][ch] = sh::dc_from_color(rgb[ch]);
        }
    }

    pub fn sh_degree(&self) -> usize {
        (self.sh.len() as f64).sqrt() as usize - 1
    }
}

/// Covariance of a cylinder with unit axis `u`. Because the two cross-section
/// scales are equal, `R diag(d², d², s²) R^T = d² I + (s² − d²) u u^T`, which
/// is independent of the roll about the axis.
pub fn cylinder_covariance(u: &Vec3, diameter: f64, length: f64) -> Matrix3<f64> {
    let d2 = diameter * diameter;
    Matrix3::identity() * d2 + (u * u.transpose()) * (length * length - d2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HairStrand {
    pub root: Vec3,
    pub segments: Vec<CylindricalGaussian>,
}

impl HairStrand {
    /// Node positions: `node_0 = root`, `node_i = node_{i-1} + s_i d_i`.
    pub fn chain_nodes(&self) -> Vec<Vec3> {
        let mut nodes = Vec::with_capacity(self.segments.len() + 1);
        let mut p = self.root;
        nodes.push(p);
        for g in &self.segments {
            p += g.direction() * g.length;
            nodes.push(p);
        }
        nodes
    }

    /// Gaussian centers `node_{i-1} + ½ s_i d_i`.
    pub fn centers(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.segments.len());
        let mut p = self.root;
        for g in &self.segments {
            let step = g.direction() * g.length;
            out.push(p + step * 0.5);
            p += step;
        }
        out
    }

    /// Segments from a node polyline. Each segment takes the minimal
    /// rotation carrying +z onto its direction.
    pub fn from_polyline(points: &[Vec3], diameter: f64, sh_degree: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        let mut segments = Vec::with_capacity(points.len() - 1);
        for (i, w) in points.windows(2).enumerate() {
            let delta = w[1] - w[0];
            let len = delta.norm();
            if len <= f64::EPSILON * w[0].norm().max(1.0) {
                return Err(Error::DegenerateSegment { index: i });
            }
            segments.push(CylindricalGaussian::new(&(delta / len), len, diameter, sh_degree));
        }
        Ok(Self {
            root: points[0],
            segments,
        })
    }

    /// Apply a rigid motion `x -> R x + t` to the strand.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        let q = math::quat_from_matrix(rotation);
        let mut out = self.clone();
        out.root = rotation * self.root + translation;
        for g in &mut out.segments {
            g.rotation = math::quat_mul(&q, &g.rotation);
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.segments.len() + 1
    }
}

/// Frozen generic 3D Gaussian for the head and body.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGaussian {
    pub mean: Vec3,
    pub rotation: Quat,
    pub scale: Vec3,
    pub opacity_logit: f64,
    pub sh: Vec<[f64; 3]>,
}

impl HeadGaussian {
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = math::rotation_matrix(&self.rotation);
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }

    pub fn opacity(&self) -> f64 {
        math::sigmoid(self.opacity_logit)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HairModel {
    pub strands: Vec<HairStrand>,
    pub head: Vec<HeadGaussian>,
    /// Scalp region of the head mesh; roots live on it.
    pub scalp: Option<TriMesh>,
    pub sh_degree: usize,
    pub diameter: f64,
    /// Bumped on every in-place parameter update; forward passes record it
    /// so a backward pass can detect stale intermediates.
    pub generation: u64,
}

impl HairModel {
    pub fn new(strands: Vec<HairStrand>, sh_degree: usize, diameter: f64) -> Self {
        Self {
            strands,
            head: Vec::new(),
            scalp: None,
            sh_degree,
            diameter,
            generation: 0,
        }
    }

    pub fn segment_count(&self) -> usize {
        self.strands.iter().map(|s| s.segments.len()).sum()
    }

    /// Common node count, if every strand has the same one.
    pub fn nodes_per_strand(&self) -> Option<usize> {
        let first = self.strands.first()?.node_count();
        self.strands
            .iter()
            .all(|s| s.node_count() == first)
            .then_some(first)
    }

    pub fn touch(&mut self) {
        self.generation = self.generation.wrapping_add(1);
    }

    /// Axis-aligned bounds over strand nodes and head means.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self
            .strands
            .iter()
            .flat_map(|s| s.chain_nodes())
            .chain(self.head.iter().map(|h| h.mean));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p))))
    }

    /// Bounding sphere of all hair segments (centers padded by half
    /// lengths).
    pub fn hair_bounding_sphere(&self) -> Option<(Vec3, f64)> {
        let nodes: Vec<Vec3> = self.strands.iter().flat_map(|s| s.chain_nodes()).collect();
        if nodes.is_empty() {
            return None;
        }
        let (lo, hi) = nodes
            .iter()
            .fold((nodes[0], nodes[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let c = (lo + hi) * 0.5;
        let r = nodes.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
        Some((c, r + self.diameter))
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let nc = sh::coeff_count(self.sh_degree);
        for (si, s) in self.strands.iter().enumerate() {
            for (j, g) in s.segments.iter().enumerate() {
                let at = || format!("strand {si} segment {j}");
                if g.diameter != self.diameter {
                    return Err(Error::InvalidParam(format!("{}: diameter differs", at())));
                }
                if !(g.length > 0.0 && g.length.is_finite()) {
                    return Err(Error::InvalidParam(format!("{}: length {}", at(), g.length)));
                }
                if g.sh.len() != nc {
                    return Err(Error::InvalidParam(format!("{}: sh count", at())));
                }
                if !(0.0..=1.0).contains(&g.tau) {
                    return Err(Error::InvalidParam(format!("{}: tau {}", at(), g.tau)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterParams {
    pub roughness: f64,
    /// Longitudinal highlight shift (radians) of the second-bounce lobe.
    pub shift: f64,
    /// Fiber refractive index.
    pub eta: f64,
    /// Artist multipliers for the R, TT and TRT lobes.
    pub lobe_scale: [f64; 3],
}

impl Default for ScatterParams {
    fn default() -> Self {
        Self {
            roughness: 0.3,
            shift: 0.07,
            eta: 1.55,
            lobe_scale: [1.0, 1.0, 1.0],
        }
    }
}

impl ScatterParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.roughness.is_finite()
            && self.shift.is_finite()
            && self.eta.is_finite()
            && self.lobe_scale.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParam("scatter params must be finite".into()));
        }
        if !(self.roughness > 0.0 && self.roughness <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "roughness must be in (0, 1], got {}",
                self.roughness
            )));
        }
        if self.eta <= 0.0 {
            return Err(Error::InvalidParam(format!("eta must be positive, got {}", self.eta)));
        }
        if self.lobe_scale.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParam("lobe_scale must be non-negative".into()));
        }
        Ok(())
    }
}
