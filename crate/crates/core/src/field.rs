//! Oriented Gaussian field: unchained cylindrical Gaussians whose
//! directions approximate the 3D hair orientation field.

use crate::math::Vec3;
use crate::mesh::TriMesh;
use crate::model::CylindricalGaussian;
use crate::raster::{Primitive, PrimitiveSet, Source};

/// Initial segment length as a multiple of the diameter.
pub const INITIAL_LENGTH_RATIO: f64 = 10.0;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientedField {
    pub means: Vec<Vec3>,
    pub gaussians: Vec<CylindricalGaussian>,
    pub sh_degree: usize,
    pub diameter: f64,
    pub generation: u64,
}

impl OrientedField {
    pub fn new(sh_degree: usize, diameter: f64) -> Self {
        Self {
            sh_degree,
            diameter,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Add a Gaussian of length `INITIAL_LENGTH_RATIO · diameter`.
    pub fn push(&mut self, mean: Vec3, direction: &Vec3) -> &mut CylindricalGaussian {
        let g = CylindricalGaussian::new(direction, INITIAL_LENGTH_RATIO * self.diameter, self.diameter, self.sh_degree);
        self.means.push(mean);
        self.gaussians.push(g);
        self.gaussians.last_mut().unwrap()
    }

    pub fn directions(&self) -> Vec<Vec3> {
        self.gaussians.iter().map(|g| g.direction()).collect()
    }

    pub fn primitives(&self) -> PrimitiveSet<'_> {
        let prims = self
            .means
            .iter()
            .zip(&self.gaussians)
            .enumerate()
            .map(|(i, (m, g))| {
                let direction = g.direction();
                Primitive {
                    mean: *m,
                    cov: crate::model::cylinder_covariance(&direction, g.diameter, g.length),
                    opacity: g.opacity(),
                    direction,
                    sh: &g.sh,
                    source: Source::Free(i as u32),
                }
            })
            .collect();
        PrimitiveSet {
            prims,
            sh_degree: self.sh_degree,
        }
    }

    /// Keep only Gaussians for which `keep(index)` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let flags: Vec<bool> = (0..self.len()).map(&mut keep).collect();
        let mut it = flags.iter();
        self.means.retain(|_| *it.next().unwrap());
        let mut it = flags.iter();
        self.gaussians.retain(|_| *it.next().unwrap());
        self.generation += 1;
    }

    /// Remove every Gaussian whose center lies inside `head`. Returns the
    /// number removed.
    pub fn clean_inside(&mut self, head: &TriMesh) -> usize {
        let before = self.len();
        let inside: Vec<bool> = self.means.iter().map(|m| head.signed_distance(m) < 0.0).collect();
        self.retain(|i| !inside[i]);
        before - self.len()
    }
}
