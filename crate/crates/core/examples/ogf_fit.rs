//! Direction recovery of an oriented field on a scene of straight fibers.

use ghair_core::camera::orbit_ring;
use ghair_core::loss::LossWeights;
use ghair_core::math::Vec3;
use ghair_core::optim::jitter_direction;
use ghair_core::pipeline::{fit_ogf, OgfConfig, TrainView};
use ghair_core::raster::{render, render_orientation, Payload, RenderConfig};
use ghair_core::synthetic::curve_field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let env = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let curves: Vec<Vec<Vec3>> = (0..40)
        .map(|_| {
            let c = Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            (0..=40).map(|k| c + d * (k as f64 - 20.0) * 1e-3).collect()
        })
        .collect();
    let gt = curve_field(&curves, 1e-4);
    let rcfg = RenderConfig::default();
    let cams = orbit_ring(Vec3::zeros(), 0.4, 0.3, 12, 0.8, 64, 64);
    let set = gt.primitives();
    let views: Vec<TrainView> = cams
        .iter()
        .map(|c| {
            let f = render(&set, c, Payload::ShColor, &rcfg).frame;
            let (o, _) = render_orientation(&set, c, &rcfg);
            TrainView { cam: c.clone(), image: f.color, alpha: f.alpha, orientation: Some(o) }
        })
        .collect();
    let mut field = gt.clone();
    let gtd = gt.directions();
    for g in &mut field.gaussians {
        let d = jitter_direction(&g.direction(), env("JIT", 40.0).to_radians(), &mut rng);
        g.rotation = ghair_core::math::quat_from_z_to(&d);
    }
    let err = |f: &ghair_core::field::OrientedField| {
        let mut e: Vec<f64> = f.directions().iter().zip(&gtd).map(|(a, b)| a.dot(b).abs().min(1.0).acos().to_degrees()).collect();
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    };
    println!("init median {:.2}", err(&field));
    let mut weights = LossWeights::default();
    weights.ori = env("W_ORI", weights.ori);
    let mut cfg = OgfConfig { iterations: env("IT", 300.0) as u64, ..Default::default() };
    cfg.optim.lr.rotation = env("LR_ROT", cfg.optim.lr.rotation);
    cfg.optim.lr.position = env("LR_POS", cfg.optim.lr.position);
    let r = fit_ogf(&mut field, &views, None, &cfg, &weights, &rcfg, &mut rng, |_, _| {}).unwrap();
    println!("loss {:.5} -> {:.5}; median {:.2}", r.losses[0], r.losses.last().unwrap(), err(&field));
}
