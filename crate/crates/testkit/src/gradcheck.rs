use ghair_core::camera::CameraView;
use ghair_core::exec::Exec;
use ghair_core::grad::{model_backward, GradBuffer};
use ghair_core::model::HairModel;
use ghair_core::raster::{render_model, Payload, RenderConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Agreement of one parameter group with central differences.
#[derive(Clone, Debug)]
pub struct GroupCheck {
    pub name: &'static str,
    pub count: usize,
    /// Largest `|a − n| / max(|a|, |n|, floor)`.
    pub worst: f64,
    /// Parameters exceeding the tolerance.
    pub failures: usize,
}

/// Random linear read-out of a render: `Σ wc·color + Σ wa·alpha`.
pub struct Probe {
    pub wc: Vec<[f64; 3]>,
    pub wa: Vec<f64>,
}

impl Probe {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            wc: (0..n)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect(),
            wa: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    pub fn value(&self, model: &HairModel, cam: &CameraView, cfg: &RenderConfig) -> f64 {
        let f = render_model(model, cam, Payload::ShColor, cfg).frame;
        let mut v = 0.0;
        for p in 0..f.color.len() {
            for ch in 0..3 {
                v += self.wc[p][ch] * f.color[p][ch];
            }
            v += self.wa[p] * f.alpha[p];
        }
        v
    }

    pub fn analytic(&self, model: &HairModel, cam: &CameraView, cfg: &RenderConfig) -> GradBuffer {
        let fwd = render_model(model, cam, Payload::ShColor, cfg);
        model_backward(model, cam, &fwd, &self.wc, Some(&self.wa), Exec::Sequential).expect("fresh forward pass")
    }
}

/// Compare every rotation, length, opacity and SH parameter against
/// central differences with step `h`. Lengths are stepped by `h · s`, i.e.
/// in units of the segment's own length. The floor of each group is
/// `floor_frac · max |numeric|` over that group.
pub fn check(model: &HairModel, cam: &CameraView, cfg: &RenderConfig, probe: &Probe, h: f64, tol: f64, floor_frac: f64) -> Vec<GroupCheck> {
    let grads = probe.analytic(model, cam, cfg);
    let mut m = model.clone();
    let mut fd = |edit: &dyn Fn(&mut HairModel, f64), h: f64| {
        edit(&mut m, h);
        let plus = probe.value(&m, cam, cfg);
        edit(&mut m, -2.0 * h);
        let minus = probe.value(&m, cam, cfg);
        edit(&mut m, h);
        (plus - minus) / (2.0 * h)
    };
    let index: Vec<(usize, usize)> = model
        .strands
        .iter()
        .enumerate()
        .flat_map(|(s, st)| (0..st.segments.len()).map(move |j| (s, j)))
        .collect();
    let sh_count = grads.sh.first().map_or(0, Vec::len);
    let mut pairs: [Vec<(f64, f64)>; 4] = Default::default();
    for (i, &(s, j)) in index.iter().enumerate() {
        for k in 0..4 {
            let n = fd(&|m, d| m.strands[s].segments[j].rotation[k] += d, h);
            pairs[0].push((grads.rotation[i][k], n));
        }
        let len = model.strands[s].segments[j].length;
        let n = fd(&|m, d| m.strands[s].segments[j].length += d, h * len);
        pairs[1].push((grads.length[i], n));
        let n = fd(&|m, d| m.strands[s].segments[j].opacity_logit += d, h);
        pairs[2].push((grads.opacity_logit[i], n));
        for c in 0..sh_count {
            for ch in 0..3 {
                let n = fd(&|m, d| m.strands[s].segments[j].sh[c][ch] += d, h);
                pairs[3].push((grads.sh[i][c][ch], n));
            }
        }
    }
    ["rotation", "length", "opacity", "sh"]
        .into_iter()
        .zip(pairs)
        .map(|(name, list)| {
            let floor = floor_frac * list.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
            let mut worst = 0.0f64;
            let mut failures = 0;
            for &(a, n) in &list {
                let scale = a.abs().max(n.abs()).max(floor);
                let r = if scale > 0.0 { (a - n).abs() / scale } else { 0.0 };
                worst = worst.max(r);
                if r > tol {
                    failures += 1;
                }
            }
            GroupCheck {
                name,
                count: list.len(),
                worst,
                failures,
            }
        })
        .collect()
}
