//! Plain SGD with per-group learning rates, exponential decay on the
//! geometric groups, and strand-wise density control.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OrientedField;
use crate::grad::GradBuffer;
use crate::math::{self, Vec3};
use crate::model::{CylindricalGaussian, HairModel};

/// Plain SGD step sizes. The image losses are per-pixel means, so
/// per-parameter gradients are small and the rates correspondingly large.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub rotation: f64,
    pub length: f64,
    pub opacity: f64,
    pub sh: f64,
    /// Field Gaussian centers (unused for chained strands).
    pub position: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            rotation: 2.0,
            length: 1e-3,
            opacity: 1e4,
            sh: 5e3,
            position: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    /// Segments below this (post-sigmoid) opacity count as empty.
    pub alpha_min: f64,
    /// Prune a strand once this fraction of its segments is empty.
    pub prune_fraction: f64,
    /// Duplicate strands whose mean center-gradient norm exceeds this
    /// quantile.
    pub dup_quantile: f64,
    /// Clone roots are jittered within this radius on the scalp.
    pub jitter: f64,
    pub interval: u64,
    pub enabled: bool,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            alpha_min: 0.01,
            prune_fraction: 0.8,
            dup_quantile: 0.98,
            jitter: 0.002,
            interval: 500,
            enabled: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr: LearningRates,
    /// Per-step decay factor of the rotation and length rates.
    pub gamma: f64,
    /// Lengths stay within these multiples of their initial value.
    pub length_clamp: [f64; 2],
    pub density: DensityConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: LearningRates::default(),
            gamma: 0.999,
            length_clamp: [0.1, 10.0],
            density: DensityConfig::default(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = &self.lr;
        if [lr.rotation, lr.length, lr.opacity, lr.sh, lr.position]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidParam("learning rates must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParam(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(self.length_clamp[0] > 0.0 && self.length_clamp[0] <= 1.0 && self.length_clamp[1] >= 1.0) {
            return Err(Error::InvalidParam("length clamp must bracket 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    /// Rates at iteration 0.
    pub base_lr: LearningRates,
    /// Rates for the next step.
    pub lr: LearningRates,
    pub gamma: f64,
    pub length_clamp: [f64; 2],
    pub iteration: u64,
    /// Initial segment lengths, per strand.
    pub initial_length: Vec<Vec<f64>>,
    /// Sum over steps of each strand's mean center-gradient norm.
    pub grad_accum: Vec<f64>,
    pub accum_steps: u64,
}

impl OptimState {
    pub fn new(model: &HairModel, cfg: &OptimConfig) -> Self {
        Self {
            base_lr: cfg.lr.clone(),
            lr: cfg.lr.clone(),
            gamma: cfg.gamma,
            length_clamp: cfg.length_clamp,
            iteration: 0,
            initial_length: model
                .strands
                .iter()
                .map(|s| s.segments.iter().map(|g| g.length).collect())
                .collect(),
            grad_accum: vec![0.0; model.strands.len()],
            accum_steps: 0,
        }
    }

    /// State for a free-Gaussian field (one pseudo-strand per Gaussian).
    pub fn for_field(field: &OrientedField, cfg: &OptimConfig) -> Self {
        Self {
            base_lr: cfg.lr.clone(),
            lr: cfg.lr.clone(),
            gamma: cfg.gamma,
            length_clamp: cfg.length_clamp,
            iteration: 0,
            initial_length: vec![field.gaussians.iter().map(|g| g.length).collect()],
            grad_accum: Vec::new(),
            accum_steps: 0,
        }
    }

    fn decay(&mut self) {
        self.iteration += 1;
        let f = self.gamma.powi(self.iteration.min(i32::MAX as u64) as i32);
        self.lr.rotation = self.base_lr.rotation * f;
        self.lr.length = self.base_lr.length * f;
    }
}

fn update(g: &mut CylindricalGaussian, grads: &GradBuffer, i: usize, lr: &LearningRates, len_range: [f64; 2]) {
    let gq = grads.rotation[i];
    if gq != [0.0; 4] {
        for k in 0..4 {
            g.rotation[k] -= lr.rotation * gq[k];
        }
        g.rotation = math::quat_normalize(&g.rotation);
    }
    if grads.length[i] != 0.0 {
        g.length = (g.length - lr.length * grads.length[i]).clamp(len_range[0], len_range[1]);
    }
    g.opacity_logit -= lr.opacity * grads.opacity_logit[i];
    for (c, d) in g.sh.iter_mut().zip(&grads.sh[i]) {
        for ch in 0..3 {
            c[ch] -= lr.sh * d[ch];
        }
    }
}

fn check_shape(n: usize, grads: &GradBuffer) -> Result<()> {
    if grads.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} gradient entries"),
            got: grads.len().to_string(),
        });
    }
    Ok(())
}

/// One SGD step on every hair segment. Head Gaussians and roots are not
/// touched.
pub fn step(model: &mut HairModel, grads: &GradBuffer, state: &mut OptimState) -> Result<()> {
    check_shape(model.segment_count(), grads)?;
    let mut i = 0;
    for (si, strand) in model.strands.iter_mut().enumerate() {
        let m = strand.segments.len();
        let mut norm_sum = 0.0;
        for (j, g) in strand.segments.iter_mut().enumerate() {
            let l0 = state.initial_length[si][j];
            let range = [state.length_clamp[0] * l0, state.length_clamp[1] * l0];
            update(g, grads, i, &state.lr, range);
            norm_sum += grads.center[i].norm();
            i += 1;
        }
        if m > 0 {
            state.grad_accum[si] += norm_sum / m as f64;
        }
    }
    state.accum_steps += 1;
    state.decay();
    model.touch();
    Ok(())
}

/// One SGD step on a free-Gaussian field, including centers.
pub fn step_field(field: &mut OrientedField, grads: &GradBuffer, state: &mut OptimState) -> Result<()> {
    check_shape(field.len(), grads)?;
    for i in 0..field.len() {
        let l0 = state.initial_length[0][i];
        let range = [state.length_clamp[0] * l0, state.length_clamp[1] * l0];
        update(&mut field.gaussians[i], grads, i, &state.lr, range);
        field.means[i] -= state.lr.position * grads.center[i];
    }
    state.decay();
    field.generation += 1;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DensityReport {
    pub pruned: usize,
    pub duplicated: usize,
}

/// Prune mostly-transparent strands and duplicate the strands with the
/// largest accumulated center gradients. Clones get a root jittered within
/// `cfg.jitter` and snapped onto the scalp; without a scalp no strand is
/// duplicated. Resets the gradient statistics.
pub fn density_control<R: Rng>(
    model: &mut HairModel,
    state: &mut OptimState,
    cfg: &DensityConfig,
    rng: &mut R,
) -> DensityReport {
    let mut report = DensityReport::default();
    let n = model.strands.len();
    let steps = state.accum_steps.max(1) as f64;
    let mean_grad: Vec<f64> = state.grad_accum.iter().map(|g| g / steps).collect();

    let prune: Vec<bool> = model
        .strands
        .iter()
        .map(|s| {
            let m = s.segments.len();
            let empty = s.segments.iter().filter(|g| g.opacity() < cfg.alpha_min).count();
            m > 0 && empty as f64 >= cfg.prune_fraction * m as f64
        })
        .collect();

    let mut dup = vec![false; n];
    if let Some(scalp) = model.scalp.as_ref() {
        let mut candidates: Vec<f64> = (0..n).filter(|&i| !prune[i]).map(|i| mean_grad[i]).collect();
        if !candidates.is_empty() {
            candidates.sort_by(f64::total_cmp);
            let q = quantile(&candidates, cfg.dup_quantile);
            for i in 0..n {
                dup[i] = !prune[i] && mean_grad[i] > q && mean_grad[i] > 0.0;
            }
        }
        let mut clones = Vec::new();
        let mut clone_lengths = Vec::new();
        for i in (0..n).filter(|&i| dup[i]) {
            let src = &model.strands[i];
            let Some(anchor) = scalp.closest_point(&src.root) else {
                continue;
            };
            let t1 = math::any_perpendicular(&anchor.normal);
            let t2 = anchor.normal.cross(&t1);
            let r = cfg.jitter * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let target = anchor.position + r * (a.cos() * t1 + a.sin() * t2);
            let Some(root) = scalp.closest_point(&target) else {
                continue;
            };
            let mut c = src.clone();
            c.root = root.position;
            clones.push(c);
            clone_lengths.push(state.initial_length[i].clone());
        }
        report.duplicated = clones.len();
        model.strands.extend(clones);
        state.initial_length.extend(clone_lengths);
    }

    let total = model.strands.len();
    let keep: Vec<bool> = (0..total).map(|i| i >= n || !prune[i]).collect();
    report.pruned = prune.iter().filter(|&&p| p).count();
    let mut it = keep.iter();
    model.strands.retain(|_| *it.next().unwrap());
    let mut it = keep.iter();
    state.initial_length.retain(|_| *it.next().unwrap());
    state.grad_accum = vec![0.0; model.strands.len()];
    state.accum_steps = 0;
    if report.pruned + report.duplicated > 0 {
        model.touch();
    }
    report
}

/// Linear-interpolated quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Direction of segment `j` after a random tilt; used by tests and the
/// synthetic pipeline to perturb strands.
pub fn jitter_direction<R: Rng>(d: &Vec3, max_angle: f64, rng: &mut R) -> Vec3 {
    math::tilt(d, rng.random::<f64>() * max_angle, rng.random::<f64>() * std::f64::consts::TAU)
}
