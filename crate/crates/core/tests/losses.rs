use ghair_core::grid::chamfer;
use ghair_core::loss::{self, LossWeights};
use ghair_core::math::Vec3;
use ghair_core::model::{HairModel, HairStrand};
use ghair_core::raster::OrientationImage;
use ghair_testkit::losses as reference;
use ghair_testkit::scenes::{hanging_strands, unit_vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let p = (0..n)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let d = (0..n).map(|_| unit_vector(rng)).collect();
    (p, d)
}

fn random_orientation(rng: &mut ChaCha8Rng, w: u32, h: u32, valid_frac: f64) -> OrientationImage {
    let mut o = OrientationImage::new(w, h);
    for p in 0..o.dir.len() {
        if rng.random::<f64>() < valid_frac {
            let a = rng.random_range(0.0..std::f64::consts::PI);
            o.dir[p] = [a.cos(), a.sin()];
            o.valid[p] = true;
        }
    }
    o
}

#[test]
fn chamfer_matches_brute_force_on_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (sp, sd) = random_points(&mut rng, 1000);
    let (fp, fd) = random_points(&mut rng, 1000);
    let c = chamfer(&sp, &sd, &fp, &fd, 1.0, 0.1).unwrap();
    let (pos, dir) = reference::chamfer(&sp, &sd, &fp, &fd);
    assert!((c.pos - pos).abs() <= 1e-6, "{} vs {pos}", c.pos);
    assert!((c.dir - dir).abs() <= 1e-6, "{} vs {dir}", c.dir);
}

#[test]
fn chamfer_examples() {
    let p = [Vec3::new(0.1, 0.2, 0.3)];
    let d = [Vec3::z()];
    assert_eq!(chamfer(&p, &d, &p, &d, 1.0, 1.0).unwrap().value(1.0, 1.0), 0.0);
    let q = [Vec3::new(0.1, 0.2, 0.35)];
    let c = chamfer(&p, &d, &q, &d, 1.0, 1.0).unwrap();
    assert!((c.pos - 0.1).abs() < 1e-15 && c.dir == 0.0);
    assert!(chamfer(&[], &[], &q, &d, 1.0, 1.0).is_err());
    assert!(chamfer(&p, &d, &[], &[], 1.0, 1.0).is_err());
}

#[test]
fn ssim_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (w, h) in [(37, 29), (64, 64), (8, 50)] {
        let x = random_image(&mut rng, w * h);
        let y: Vec<[f64; 3]> = x
            .iter()
            .map(|p| std::array::from_fn(|c| (p[c] + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0)))
            .collect();
        let (s, _) = loss::ssim(&x, &y, w, h, false).unwrap();
        let r = reference::ssim(&x, &y, w, h);
        assert!((s - r).abs() <= 1e-6, "{w}x{h}: {s} vs {r}");
    }
}

#[test]
fn photometric_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<[f64; 3]> = (0..400).map(|_| std::array::from_fn(|_| rng.random_range(0.0..0.8))).collect();
    let w = LossWeights::default();
    assert_eq!(loss::photometric(&y, &y, 20, 20, &w).unwrap().value, 0.0);
    let x: Vec<[f64; 3]> = y.iter().map(|p| std::array::from_fn(|c| p[c] + 0.1)).collect();
    let l1 = loss::photometric(&x, &y, 20, 20, &w).unwrap().l1;
    assert!((l1 - 0.1).abs() < 1e-12);
    assert!(loss::photometric(&x, &y[..399], 20, 20, &w).is_err());
}

#[test]
fn alpha_loss_examples_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..0.5)).collect();
    assert_eq!(loss::alpha_loss(&a, &a).unwrap().0, 0.0);
    let mut b = a.clone();
    for v in b.iter_mut().take(37) {
        *v += 0.5;
    }
    assert!((loss::alpha_loss(&b, &a).unwrap().0 - 0.5 * 37.0).abs() < 1e-12);
    let c: Vec<f64> = (0..500).map(|_| rng.random()).collect();
    let direct: f64 = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).sum();
    assert!((loss::alpha_loss(&c, &a).unwrap().0 - direct).abs() <= 1e-9);
    assert!(loss::alpha_loss(&a, &c[..10]).is_err());
}

#[test]
fn orientation_loss_examples_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_orientation(&mut rng, 30, 20, 0.7);
    assert!(loss::orientation_loss(&t, &t).unwrap().abs() < 1e-12);
    let mut perp = t.clone();
    for d in perp.dir.iter_mut() {
        *d = [-d[1], d[0]];
    }
    let n = t.valid_count() as f64;
    assert!((loss::orientation_loss(&perp, &t).unwrap() - n).abs() < 1e-9);
    let r = random_orientation(&mut rng, 30, 20, 0.7);
    let mut direct = 0.0;
    for p in 0..t.dir.len() {
        if t.valid[p] {
            let (a, b) = (r.dir[p], t.dir[p]);
            let dot = if r.valid[p] { a[0] * b[0] + a[1] * b[1] } else { 0.0 };
            direct += 1.0 - dot.abs();
        }
    }
    assert!((loss::orientation_loss(&r, &t).unwrap() - direct).abs() <= 1e-9);
}

#[test]
fn smoothness_hand_case() {
    let pts: Vec<Vec3> = (0..4).map(|i| Vec3::new(0.0, 0.0, 0.01 * i as f64)).collect();
    let mut s = HairStrand::from_polyline(&pts, 1e-4, 0).unwrap();
    for (g, logit) in s.segments.iter_mut().zip([-1000.0, 1000.0, 1000.0]) {
        g.opacity_logit = logit;
    }
    let m = HairModel::new(vec![s.clone()], 0, 1e-4);
    assert_eq!(loss::smoothness(&m, 1.0, 1.0).opa, 1.0);
    for g in &mut s.segments {
        g.set_opacity(0.4);
    }
    let flat = loss::smoothness(&HairModel::new(vec![s], 0, 1e-4), 1.0, 1.0);
    assert!(flat.opa == 0.0 && flat.pam < 1e-15);
}

#[test]
fn smoothness_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = hanging_strands(&mut rng, 3, 8, 0, 1e-4);
    for g in model.strands.iter_mut().flat_map(|s| s.segments.iter_mut()) {
        g.length *= rng.random_range(0.5..1.5);
        g.rotation = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    }
    let (wo, wp) = (0.7, 1.3);
    let value = |m: &HairModel| {
        let s = loss::smoothness(m, wo, wp);
        wo * s.opa + wp * s.pam
    };
    let sm = loss::smoothness(&model, wo, wp);
    let mut grads = ghair_core::grad::GradBuffer::zeros(model.segment_count(), 1);
    ghair_core::grad::add_smoothness(&model, &sm, &mut grads);
    let h = 1e-7;
    let mut i = 0;
    for s in 0..model.strands.len() {
        for j in 0..model.strands[s].segments.len() {
            let fd = |edit: &dyn Fn(&mut HairModel, f64)| {
                let mut m = model.clone();
                edit(&mut m, h);
                let p = value(&m);
                edit(&mut m, -2.0 * h);
                (p - value(&m)) / (2.0 * h)
            };
            let n = fd(&|m, d| m.strands[s].segments[j].opacity_logit += d);
            assert!((n - grads.opacity_logit[i]).abs() <= 1e-6 * n.abs().max(1.0), "logit {i}: {n}");
            let n = fd(&|m, d| m.strands[s].segments[j].length += d);
            assert!((n - grads.length[i]).abs() <= 1e-6 * n.abs().max(1.0), "length {i}: {n}");
            for k in 0..4 {
                let n = fd(&|m, d| m.strands[s].segments[j].rotation[k] += d);
                assert!((n - grads.rotation[i][k]).abs() <= 1e-5 * n.abs().max(1.0), "rotation {i}/{k}: {n}");
            }
            i += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn smoothness_matches_direct_loops(seed in any::<u64>(), strands in 1usize..6, segs in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = hanging_strands(&mut rng, strands, segs, 0, 1e-4);
        let s = loss::smoothness(&model, 1.0, 1.0);
        let (opa, pam) = reference::smoothness(&model);
        prop_assert!((s.opa - opa).abs() <= 1e-9 && (s.pam - pam).abs() <= 1e-9);
    }

    #[test]
    fn losses_are_non_negative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_image(&mut rng, 144);
        let y = random_image(&mut rng, 144);
        prop_assert!(loss::photometric(&x, &y, 12, 12, &LossWeights::default()).unwrap().value >= 0.0);
        let a: Vec<f64> = (0..144).map(|_| rng.random()).collect();
        prop_assert!(loss::alpha_loss(&a, &a.iter().map(|v| 1.0 - v).collect::<Vec<_>>()).unwrap().0 >= 0.0);
        let o1 = random_orientation(&mut rng, 12, 12, 0.5);
        let o2 = random_orientation(&mut rng, 12, 12, 0.5);
        prop_assert!(loss::orientation_loss(&o1, &o2).unwrap() >= 0.0);
        let (sp, sd) = random_points(&mut rng, 20);
        let (fp, fd) = random_points(&mut rng, 30);
        prop_assert!(chamfer(&sp, &sd, &fp, &fd, 1.0, 0.1).unwrap().value(1.0, 0.1) >= 0.0);
    }

    #[test]
    fn chamfer_matches_brute_force(seed in any::<u64>(), n in 1usize..80, m in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sp, sd) = random_points(&mut rng, n);
        let (fp, fd) = random_points(&mut rng, m);
        let c = chamfer(&sp, &sd, &fp, &fd, 1.0, 1.0).unwrap();
        let (pos, dir) = reference::chamfer(&sp, &sd, &fp, &fd);
        prop_assert!((c.pos - pos).abs() <= 1e-9 && (c.dir - dir).abs() <= 1e-9);
    }
}
