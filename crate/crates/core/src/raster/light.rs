use serde::{Deserialize, Serialize};

use super::{render, Payload, PrimitiveSet, RenderConfig, Source, Splat2D, TileBins};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::math::{any_perpendicular, Vec3};
use crate::model::HairModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightPassConfig {
    /// Side of the square light view. Odd, so the central pixel sits on
    /// the light axis.
    pub resolution: u32,
    /// Kernel value above which a Gaussian counts as responsible for a ray.
    pub threshold: f64,
    pub cov_dilation: f64,
    pub tile_size: usize,
    pub exec: Exec,
}

impl Default for LightPassConfig {
    fn default() -> Self {
        Self {
            resolution: 257,
            threshold: 0.5,
            cov_dilation: 0.3,
            tile_size: 16,
            exec: Exec::default(),
        }
    }
}

/// Perspective view from `position` whose frustum just contains the sphere.
pub fn light_camera(position: &Vec3, center: &Vec3, radius: f64, resolution: u32) -> Result<CameraView> {
    let dist = (center - position).norm();
    if !(dist > radius) {
        return Err(Error::LightInsideBounds {
            distance: dist,
            radius,
        });
    }
    let axis = (center - position) / dist;
    let fovy = 2.0 * (radius / dist).asin() * 1.02;
    Ok(CameraView::look_at(
        *position,
        *center,
        any_perpendicular(&axis),
        fovy.min(3.1),
        resolution,
        resolution,
    ))
}

/// Per-splat τ: the transmittance in front of the splat on every ray where
/// its kernel exceeds `threshold`, minimised over rays; 1 where it is never
/// responsible. Compositing does not stop early here.
///
/// Minimising over rays alone can leave a splat brighter than one in front
/// of it on a shared ray, so shadowing is then pushed down every ray: each
/// responsible splat ends at or below the τ of its predecessor on that ray.
pub fn transmittance(splats: &[Splat2D], bins: &TileBins, threshold: f64, exec: Exec) -> Vec<f64> {
    let partials = exec.map(bins.tile_count(), |t| {
        let list = &bins.lists[t];
        let mut tau = vec![1.0f64; list.len()];
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let (x0, x1, y0, y1) = bins.tile_pixels(t);
        for y in y0..y1 {
            for x in x0..x1 {
                let mut t_acc = 1.0;
                let mut prev: Option<u32> = None;
                for (j, &k) in list.iter().enumerate() {
                    let s = &splats[k as usize];
                    let g = s.kernel_at(x as f64, y as f64);
                    if g <= 0.0 {
                        continue;
                    }
                    if g > threshold {
                        tau[j] = tau[j].min(t_acc);
                        if let Some(p) = prev {
                            edges.push((p, k));
                        }
                        prev = Some(k);
                    }
                    t_acc *= 1.0 - s.opacity * g;
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        (tau, edges)
    });
    let mut out = vec![1.0f64; splats.len()];
    let mut edges = Vec::new();
    for (t, (part, e)) in partials.into_iter().enumerate() {
        for (&k, v) in bins.lists[t].iter().zip(part) {
            let o = &mut out[k as usize];
            *o = o.min(v);
        }
        edges.extend(e);
    }
    // Every edge points forward in the global (depth, id) order, so one
    // sweep in that order sees each predecessor already final.
    let mut rank = vec![0usize; splats.len()];
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&splats[a], &splats[b]);
        sa.depth.total_cmp(&sb.depth).then(sa.source_id.cmp(&sb.source_id))
    });
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    edges.sort_unstable_by_key(|&(p, k)| (rank[k as usize], rank[p as usize]));
    edges.dedup();
    for (p, k) in edges {
        let v = out[p as usize];
        let o = &mut out[k as usize];
        *o = o.min(v);
    }
    out
}

/// τ of every hair segment for a point light at `position`, in model order
/// (strand-major). Head Gaussians are not part of the light view.
pub fn hair_transmittance(model: &HairModel, position: &Vec3, cfg: &LightPassConfig) -> Result<Vec<f64>> {
    let Some((center, radius)) = model.hair_bounding_sphere() else {
        return Ok(Vec::new());
    };
    let cam = light_camera(position, &center, radius, cfg.resolution)?;
    let set = PrimitiveSet::from_model(model, false);
    let rcfg = RenderConfig {
        tile_size: cfg.tile_size,
        early_stop: 0.0,
        cov_dilation: cfg.cov_dilation,
        exec: cfg.exec,
        ..RenderConfig::default()
    };
    let fwd = render(&set, &cam, Payload::AlphaOnly, &rcfg);
    let per_splat = transmittance(&fwd.splats, &fwd.bins, cfg.threshold, cfg.exec);
    let mut tau = vec![1.0; set.len()];
    for (s, v) in fwd.splats.iter().zip(per_splat) {
        tau[s.source_id] = v;
    }
    debug_assert!(set.prims.iter().all(|p| matches!(p.source, Source::Hair { .. })));
    Ok(tau)
}

/// Run the light pass and store the result in every segment's `tau`.
pub fn light_pass(model: &mut HairModel, position: &Vec3, cfg: &LightPassConfig) -> Result<()> {
    let tau = hair_transmittance(model, position, cfg)?;
    let mut it = tau.into_iter();
    for strand in &mut model.strands {
        for g in &mut strand.segments {
            g.tau = it.next().unwrap_or(1.0);
        }
    }
    Ok(())
}
