use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fine::view_accum;
use super::TrainView;
use crate::error::{Error, Result};
use crate::field::OrientedField;
use crate::grad::{self, GradBuffer};
use crate::loss::LossWeights;
use crate::math::{self, Vec3};
use crate::mesh::TriMesh;
use crate::model::{HairModel, HairStrand};
use crate::optim::{self, LearningRates, OptimConfig, OptimState};
use crate::raster::RenderConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OgfConfig {
    pub samples: usize,
    /// Share of samples taken on the head mesh; the rest fill the space
    /// between the hair mesh and the head.
    pub head_fraction: f64,
    /// Head samples are pushed outward by up to this distance.
    pub head_offset: f64,
    pub initial_opacity: f64,
    pub iterations: u64,
    pub views_per_step: usize,
    /// Field step sizes. Each field Gaussian covers about one pixel, so
    /// rotations need a much larger rate than chained strands.
    pub optim: OptimConfig,
}

impl Default for OgfConfig {
    fn default() -> Self {
        Self {
            samples: 4000,
            head_fraction: 0.3,
            head_offset: 0.004,
            initial_opacity: 0.5,
            iterations: 500,
            views_per_step: 1,
            optim: OptimConfig {
                lr: LearningRates {
                    rotation: 2000.0,
                    position: 1e-2,
                    ..LearningRates::default()
                },
                ..OptimConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OgfReport {
    pub losses: Vec<f64>,
    /// Gaussians removed by head cleaning.
    pub removed: usize,
}

/// Seed a field from the head and hair meshes. Directions start tangent to
/// the nearest surface at a random azimuth.
pub fn init_field<R: Rng>(head: &TriMesh, hair: &TriMesh, cfg: &OgfConfig, sh_degree: usize, diameter: f64, rng: &mut R) -> Result<OrientedField> {
    if head.is_empty() && hair.is_empty() {
        return Err(Error::Empty("head and hair meshes"));
    }
    let n_head = if hair.is_empty() {
        cfg.samples
    } else if head.is_empty() {
        0
    } else {
        (cfg.samples as f64 * cfg.head_fraction.clamp(0.0, 1.0)).round() as usize
    };
    let mut field = OrientedField::new(sh_degree, diameter);
    let mut add = |p: Vec3, normal: Vec3, rng: &mut R| {
        let t1 = math::any_perpendicular(&normal);
        let t2 = normal.cross(&t1);
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        let g = field.push(p, &(a.cos() * t1 + a.sin() * t2));
        g.set_opacity(cfg.initial_opacity);
        g.set_base_color([0.5; 3]);
    };
    for sp in head.sample(n_head, rng) {
        let off = rng.random::<f64>() * cfg.head_offset;
        add(sp.position + off * sp.normal, sp.normal, rng);
    }
    for sp in hair.sample(cfg.samples - n_head, rng) {
        let t = rng.random::<f64>();
        let p = match head.closest_point(&sp.position) {
            Some(q) => sp.position + t * (q.position - sp.position),
            None => sp.position,
        };
        add(p, sp.normal, rng);
    }
    Ok(field)
}

/// Fit the field to the views with photometric, alpha and orientation
/// losses, then drop Gaussians inside the head.
#[allow(clippy::too_many_arguments)]
pub fn fit_ogf<R: Rng>(
    field: &mut OrientedField,
    views: &[TrainView],
    head: Option<&TriMesh>,
    cfg: &OgfConfig,
    weights: &LossWeights,
    rcfg: &RenderConfig,
    rng: &mut R,
    mut on_step: impl FnMut(u64, f64),
) -> Result<OgfReport> {
    if views.is_empty() {
        return Err(Error::Empty("training views"));
    }
    if let Some(v) = views.iter().find(|v| v.orientation.is_none()) {
        return Err(Error::MissingField(format!("orientation map for camera {}", v.cam.id)));
    }
    let mut state = OptimState::for_field(field, &cfg.optim);
    let per_step = cfg.views_per_step.clamp(1, views.len());
    let mut order: Vec<usize> = Vec::new();
    let mut report = OgfReport::default();
    for _ in 0..cfg.iterations {
        let mut grads = GradBuffer::zeros(field.len(), crate::sh::coeff_count(field.sh_degree));
        let mut total = 0.0;
        for _ in 0..per_step {
            if order.is_empty() {
                order = (0..views.len()).collect();
                order.shuffle(rng);
            }
            let v = &views[order.pop().unwrap()];
            let set = field.primitives();
            let (l, acc) = view_accum(&set, v, weights, rcfg)?;
            total += l.total / per_step as f64;
            grads.add_scaled(&grad::field_backward(field, &acc), 1.0 / per_step as f64);
        }
        optim::step_field(field, &grads, &mut state)?;
        report.losses.push(total);
        on_step(state.iteration, total);
    }
    if let Some(h) = head {
        report.removed = field.clean_inside(h);
    }
    Ok(report)
}

/// Store a field as single-segment strands centered on the field means.
pub fn field_to_model(field: &OrientedField) -> HairModel {
    let strands = field
        .means
        .iter()
        .zip(&field.gaussians)
        .map(|(m, g)| HairStrand {
            root: m - 0.5 * g.length * g.direction(),
            segments: vec![g.clone()],
        })
        .collect();
    HairModel::new(strands, field.sh_degree, field.diameter)
}

pub fn field_from_model(model: &HairModel) -> Result<OrientedField> {
    let mut field = OrientedField::new(model.sh_degree, model.diameter);
    for s in &model.strands {
        if s.segments.len() != 1 {
            return Err(Error::InvalidParam(format!("field files hold one segment per entry, found {}", s.segments.len())));
        }
        let g = &s.segments[0];
        field.means.push(s.root + 0.5 * g.length * g.direction());
        field.gaussians.push(g.clone());
    }
    Ok(field)
}
