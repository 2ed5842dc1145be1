use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OrientedField;
use crate::grid::{chamfer, Chamfer, PointGrid};
use crate::math::Vec3;
use crate::mesh::TriMesh;
use crate::model::{HairModel, HairStrand};

const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrandConfig {
    pub count: usize,
    /// Nodes per strand after resampling (at most this many are traced).
    pub nodes: usize,
    pub step: f64,
    /// Tracing stops when no field Gaussian lies this close.
    pub search_radius: f64,
    pub refine_iterations: usize,
    /// Node displacement per unit gradient during refinement.
    pub refine_lr: f64,
    pub initial_opacity: f64,
}

impl Default for StrandConfig {
    fn default() -> Self {
        Self {
            count: 200,
            nodes: 100,
            step: 0.002,
            search_radius: 0.006,
            refine_iterations: 50,
            refine_lr: 2e-5,
            initial_opacity: 0.7,
        }
    }
}

/// Grow a polyline from `root` by stepping along the nearest field
/// direction, signed to continue the previous step (initially `start`).
pub fn trace_strand(grid: &PointGrid<'_>, dirs: &[Vec3], root: Vec3, start: Vec3, cfg: &StrandConfig) -> Vec<Vec3> {
    let mut pts = vec![root];
    let mut prev = start;
    while pts.len() < cfg.nodes {
        let p = *pts.last().unwrap();
        let Some((o, dist)) = grid.nearest(&p) else { break };
        if dist > cfg.search_radius {
            break;
        }
        let mut d = dirs[o];
        if d.dot(&prev) < 0.0 {
            d = -d;
        }
        pts.push(p + cfg.step * d);
        prev = d;
    }
    pts
}

/// Resample a polyline to `n` nodes equally spaced in arc length.
pub fn resample(points: &[Vec3], n: usize) -> Vec<Vec3> {
    if points.len() < 2 || n < 2 {
        return points.iter().take(n).copied().collect();
    }
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = total * i as f64 / (n - 1) as f64;
        while k + 2 < cum.len() && cum[k + 1] < t {
            k += 1;
        }
        let seg = cum[k + 1] - cum[k];
        let f = if seg > 0.0 { ((t - cum[k]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        out.push(points[k] + f * (points[k + 1] - points[k]));
    }
    out
}

fn samples(lines: &[Vec<Vec3>]) -> (Vec<Vec3>, Vec<Vec3>, Vec<(usize, usize)>) {
    let mut pos = Vec::new();
    let mut dir = Vec::new();
    let mut at = Vec::new();
    for (l, line) in lines.iter().enumerate() {
        for j in 0..line.len().saturating_sub(1) {
            let e = line[j + 1] - line[j];
            pos.push(0.5 * (line[j] + line[j + 1]));
            dir.push(e.normalize());
            at.push((l, j));
        }
    }
    (pos, dir, at)
}

/// Gradient descent on the oriented chamfer between polyline segments and
/// the field, with roots held fixed. Field directions are first flipped to
/// agree with the nearest strand segment. A step that would raise the
/// loss is retried at half the rate. Returns the loss per iteration.
pub fn refine_geo(lines: &mut [Vec<Vec3>], field: &OrientedField, w_pos: f64, w_dir: f64, iterations: usize, lr: f64) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Err(Error::Empty("field"));
    }
    let (pos, dir, _) = samples(lines);
    if pos.is_empty() {
        return Err(Error::Empty("strand samples"));
    }
    let grid = PointGrid::new(&pos);
    let fdir: Vec<Vec3> = field
        .means
        .iter()
        .zip(field.directions())
        .map(|(m, d)| {
            let (k, _) = grid.nearest(m).expect("non-empty");
            if d.dot(&dir[k]) < 0.0 {
                -d
            } else {
                d
            }
        })
        .collect();
    let objective = |lines: &[Vec<Vec3>]| -> Result<(Chamfer, Vec<(usize, usize)>, Vec<Vec3>)> {
        let (pos, dir, at) = samples(lines);
        Ok((chamfer(&pos, &dir, &field.means, &fdir, w_pos, w_dir)?, at, dir))
    };
    let mut history = Vec::with_capacity(iterations);
    let mut step = lr;
    let (mut c, mut at, mut dir) = objective(lines)?;
    for _ in 0..iterations {
        let value = c.value(w_pos, w_dir);
        history.push(value);
        let mut g: Vec<Vec<Vec3>> = lines.iter().map(|l| vec![Vec3::zeros(); l.len()]).collect();
        for (k, &(l, j)) in at.iter().enumerate() {
            let e = lines[l][j + 1] - lines[l][j];
            let len = e.norm();
            let gd = (c.d_dir[k] - dir[k] * dir[k].dot(&c.d_dir[k])) / len;
            g[l][j] += 0.5 * c.d_pos[k] - gd;
            g[l][j + 1] += 0.5 * c.d_pos[k] + gd;
        }
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<Vec<Vec3>> = lines
                .iter()
                .zip(&g)
                .map(|(line, gl)| {
                    line.iter()
                        .zip(gl)
                        .enumerate()
                        .map(|(k, (p, gp))| if k == 0 { *p } else { p - step * gp })
                        .collect()
                })
                .collect();
            if trial.iter().any(|l| l.windows(2).any(|w| w[0] == w[1])) {
                step *= 0.5;
                continue;
            }
            let next = objective(&trial)?;
            if next.0.value(w_pos, w_dir) <= value {
                lines.iter_mut().zip(trial).for_each(|(l, t)| *l = t);
                (c, at, dir) = next;
                accepted = true;
                step = (2.0 * step).min(lr);
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(history)
}

/// Coarse strands: trace from scalp roots through the field, refine
/// against it, resample to a uniform node count, and take colors from the
/// nearest field Gaussian. Strands too short to hold `nodes` segments of
/// at least twice the fiber diameter are dropped.
pub fn strands_from_field<R: Rng>(field: &OrientedField, scalp: &TriMesh, cfg: &StrandConfig, w_pos: f64, w_dir: f64, rng: &mut R) -> Result<HairModel> {
    if field.is_empty() {
        return Err(Error::Empty("field"));
    }
    if cfg.nodes < 2 || cfg.nodes > crate::model::MAX_NODES {
        return Err(Error::InvalidParam(format!("nodes must lie in [2, {}]", crate::model::MAX_NODES)));
    }
    let grid = PointGrid::new(&field.means);
    let dirs = field.directions();
    let mut lines: Vec<Vec<Vec3>> = scalp
        .sample(cfg.count, rng)
        .into_iter()
        .map(|sp| trace_strand(&grid, &dirs, sp.position, sp.normal, cfg))
        .filter(|l| l.len() >= 2)
        .collect();
    if lines.is_empty() {
        return Err(Error::Empty("traced strands"));
    }
    refine_geo(&mut lines, field, w_pos, w_dir, cfg.refine_iterations, cfg.refine_lr)?;
    let min_len = 2.0 * field.diameter * (cfg.nodes - 1) as f64;
    let mut strands = Vec::new();
    for line in &lines {
        let len: f64 = line.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if len < min_len {
            continue;
        }
        let pts = resample(line, cfg.nodes);
        let Ok(mut s) = HairStrand::from_polyline(&pts, field.diameter, field.sh_degree) else {
            continue;
        };
        let centers = s.centers();
        for (g, c) in s.segments.iter_mut().zip(centers) {
            let (o, _) = grid.nearest(&c).expect("non-empty");
            g.sh.clone_from(&field.gaussians[o].sh);
            g.set_opacity(cfg.initial_opacity);
        }
        strands.push(s);
    }
    let mut model = HairModel::new(strands, field.sh_degree, field.diameter);
    model.scalp = Some(scalp.clone());
    Ok(model)
}
