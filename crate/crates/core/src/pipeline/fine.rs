use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainView;
use crate::error::Result;
use crate::grad::{self, GradBuffer, PrimAccum};
use crate::loss::{self, LossWeights};
use crate::model::HairModel;
use crate::optim::{self, DensityConfig, DensityReport, OptimState};
use crate::raster::{self, Payload, PrimitiveSet, RenderConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineConfig {
    pub iterations: u64,
    pub views_per_step: usize,
    /// Camera ids excluded from training.
    pub holdout: Vec<u64>,
    /// When false only opacity and color are updated.
    pub optimize_geometry: bool,
}

impl Default for FineConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            views_per_step: 1,
            holdout: Vec::new(),
            optimize_geometry: true,
        }
    }
}

/// Per-view loss terms. `alpha` and `orientation` are per-pixel means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ViewLoss {
    pub photometric: f64,
    pub alpha: f64,
    pub orientation: f64,
    pub total: f64,
}

/// Loss of one view rendered from `set`, back-propagated into
/// per-primitive accumulators.
pub(crate) fn view_accum(set: &PrimitiveSet<'_>, view: &TrainView, weights: &LossWeights, rcfg: &RenderConfig) -> Result<(ViewLoss, Vec<PrimAccum>)> {
    let cam = &view.cam;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let npx = (w * h) as f64;
    let fwd = raster::render(set, cam, Payload::ShColor, rcfg);
    let pho = loss::photometric(&fwd.frame.color, &view.image, w, h, weights)?;
    let (alp, mut d_alpha) = loss::alpha_loss(&fwd.frame.alpha, &view.alpha)?;
    d_alpha.iter_mut().for_each(|g| *g *= weights.alp / npx);
    let mut acc = grad::accum_zeros(set.len(), set.sh_degree);
    grad::splat_backward(set, cam, &fwd, &pho.grad, Some(&d_alpha), rcfg.exec, &mut acc);
    let mut ori = 0.0;
    if let (Some(target), true) = (&view.orientation, weights.ori > 0.0) {
        ori = grad::orientation_backward(set, cam, &fwd, target, rcfg.alpha_valid, weights.ori / npx, &mut acc) / npx;
    }
    let alpha = alp / npx;
    let l = ViewLoss {
        photometric: pho.value,
        alpha,
        orientation: ori,
        total: pho.value + weights.alp * alpha + weights.ori * ori,
    };
    Ok((l, acc))
}

/// Render `view` from `model` and return the weighted loss
/// `L_pho + w_alp·L_alp/N + w_ori·L_ori/N` (N pixels) with its gradient.
pub fn view_gradient(model: &HairModel, view: &TrainView, weights: &LossWeights, rcfg: &RenderConfig) -> Result<(ViewLoss, GradBuffer)> {
    let set = PrimitiveSet::from_model(model, true);
    let (l, acc) = view_accum(&set, view, weights, rcfg)?;
    Ok((l, grad::hair_backward(model, &acc)))
}

#[derive(Clone, Debug, Default)]
pub struct FineReport {
    /// Objective value of each step (views of that step plus smoothness).
    pub losses: Vec<f64>,
    pub density: Vec<(u64, DensityReport)>,
}

/// SGD on the chained strand model. Smoothness terms are averaged over
/// segments so that their scale matches the per-pixel image terms.
#[allow(clippy::too_many_arguments)]
pub fn run_fine<R: Rng>(
    model: &mut HairModel,
    views: &[TrainView],
    cfg: &FineConfig,
    weights: &LossWeights,
    rcfg: &RenderConfig,
    density: &DensityConfig,
    state: &mut OptimState,
    rng: &mut R,
    mut on_step: impl FnMut(u64, f64),
) -> Result<FineReport> {
    if views.is_empty() {
        return Err(crate::Error::Empty("training views"));
    }
    let per_step = cfg.views_per_step.clamp(1, views.len());
    let mut order: Vec<usize> = Vec::new();
    let mut report = FineReport::default();
    for _ in 0..cfg.iterations {
        let n = model.segment_count();
        let mut grads = GradBuffer::zeros(n, crate::sh::coeff_count(model.sh_degree));
        let mut total = 0.0;
        for _ in 0..per_step {
            if order.is_empty() {
                order = (0..views.len()).collect();
                order.shuffle(rng);
            }
            let v = order.pop().unwrap();
            let (l, g) = view_gradient(model, &views[v], weights, rcfg)?;
            total += l.total / per_step as f64;
            grads.add_scaled(&g, 1.0 / per_step as f64);
        }
        if n > 0 && (weights.opa > 0.0 || weights.pam > 0.0) {
            let sm = loss::smoothness(model, weights.opa / n as f64, weights.pam / n as f64);
            total += (weights.opa * sm.opa + weights.pam * sm.pam) / n as f64;
            grad::add_smoothness(model, &sm, &mut grads);
        }
        if !cfg.optimize_geometry {
            grads.rotation.iter_mut().for_each(|q| *q = [0.0; 4]);
            grads.length.iter_mut().for_each(|l| *l = 0.0);
        }
        optim::step(model, &grads, state)?;
        report.losses.push(total);
        on_step(state.iteration, total);
        if density.enabled && density.interval > 0 && state.iteration % density.interval == 0 {
            let r = optim::density_control(model, state, density, rng);
            log::debug!("density control at {}: {:?}", state.iteration, r);
            report.density.push((state.iteration, r));
        }
    }
    Ok(report)
}
