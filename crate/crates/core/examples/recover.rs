//! Appearance and geometry recovery on the synthetic wig.
//!
//! `cargo run --release --example recover -- [iterations]`

use std::time::Instant;

use ghair_core::loss::{self, LossWeights};
use ghair_core::optim::{OptimConfig, OptimState};
use ghair_core::pipeline::{run_fine, FineConfig, TrainView};
use ghair_core::raster::{render_model, Payload, RenderConfig};
use ghair_core::synthetic::{perturb, wig_scene, WigConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let iterations: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let rcfg = RenderConfig::default();
    let scene = wig_scene(&WigConfig::default(), &rcfg);
    let holdout = [3u64, 9, 15, 21];
    let views: Vec<TrainView> = scene
        .cameras
        .iter()
        .zip(&scene.images)
        .zip(&scene.alphas)
        .map(|((c, i), a)| TrainView {
            cam: c.clone(),
            image: i.clone(),
            alpha: a.clone(),
            orientation: None,
        })
        .collect();
    let (test, train): (Vec<_>, Vec<_>) = views.into_iter().partition(|v| holdout.contains(&v.cam.id));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let angle = std::env::var("TILT").ok().and_then(|v| v.parse().ok()).unwrap_or(10.0f64);
    let mut model = perturb(&scene.model, angle.to_radians(), &mut rng);
    let mut optim = OptimConfig::default();
    let env = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    optim.lr.sh = env("LR_SH", optim.lr.sh);
    optim.lr.opacity = env("LR_OP", optim.lr.opacity);
    optim.lr.rotation = env("LR_ROT", optim.lr.rotation);
    optim.lr.length = env("LR_LEN", optim.lr.length);
    optim.gamma = env("GAMMA", optim.gamma);
    optim.density.enabled = env("DENSITY", 1.0) > 0.0;
    let mut state = OptimState::new(&model, &optim);
    let weights = LossWeights::default();
    let eval = |m: &ghair_core::model::HairModel| {
        let mut p = 0.0;
        let mut a = 0.0;
        for v in &test {
            let f = render_model(m, &v.cam, Payload::ShColor, &rcfg).frame;
            p += loss::psnr(&f.color, &v.image) / test.len() as f64;
            a += f.alpha.iter().zip(&v.alpha).map(|(x, y)| (x - y).abs()).sum::<f64>() / f.alpha.len() as f64 / test.len() as f64;
        }
        (p, a)
    };
    println!("init: psnr/alpha {:?}  gt self {:?}", eval(&model), eval(&scene.model));
    let start = Instant::now();
    let chunk = 250.min(iterations);
    let mut done = 0;
    while done < iterations {
        let cfg = FineConfig {
            iterations: chunk,
            ..Default::default()
        };
        let r = run_fine(&mut model, &train, &cfg, &weights, &rcfg, &optim.density, &mut state, &mut rng, |_, _| {}).unwrap();
        done += chunk;
        let mean: f64 = r.losses.iter().sum::<f64>() / r.losses.len() as f64;
        println!("{done:5} loss {mean:.5} eval {:?} strands {} t={:.1}s", eval(&model), model.strands.len(), start.elapsed().as_secs_f64());
    }
}
