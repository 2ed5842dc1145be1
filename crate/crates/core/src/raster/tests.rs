use nalgebra::{Matrix3, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::camera::CameraView;
use crate::model::{HairModel, HairStrand};
use crate::sh;

fn cam(w: u32, h: u32) -> CameraView {
    CameraView {
        id: 0,
        width: w,
        height: h,
        fx: 100.0,
        fy: 100.0,
        cx: 32.0,
        cy: 32.0,
        world_to_camera: Matrix4::identity(),
    }
}

fn dc(c: [f64; 3]) -> Vec<[f64; 3]> {
    vec![[sh::dc_from_color(c[0]), sh::dc_from_color(c[1]), sh::dc_from_color(c[2])]]
}

fn prim<'a>(mean: Vec3, sigma: f64, opacity: f64, sh: &'a [[f64; 3]], id: u32) -> Primitive<'a> {
    Primitive {
        mean,
        cov: Matrix3::identity() * sigma * sigma,
        opacity,
        direction: Vec3::zeros(),
        sh,
        source: Source::Free(id),
    }
}

fn set(prims: Vec<Primitive<'_>>) -> PrimitiveSet<'_> {
    PrimitiveSet { prims, sh_degree: 0 }
}

#[test]
fn on_axis_projection() {
    let cfg = RenderConfig::default();
    let sigma = 0.01;
    let cov = Matrix3::identity() * sigma * sigma;
    let (m, c, _) = project(&Vec3::new(0.0, 0.0, 1.0), &cov, &cam(64, 64), &cfg).unwrap();
    assert!((m.x - 32.0).abs() < 1e-12 && (m.y - 32.0).abs() < 1e-12);
    let want = (100.0 * sigma).powi(2) + 0.3;
    assert!((c[(0, 0)] - want).abs() < 0.01 * want);
    assert!((c[(1, 1)] - want).abs() < 0.01 * want);
    assert!(c[(0, 1)].abs() < 1e-12);
    assert!(project(&Vec3::new(0.0, 0.0, -1.0), &cov, &cam(64, 64), &cfg).is_none());
}

#[test]
fn single_opaque_splat() {
    let c = dc([0.2, 0.4, 0.6]);
    let s = set(vec![prim(Vec3::new(0.0, 0.0, 1.0), 0.02, 1.0, &c, 0)]);
    let fwd = render(&s, &cam(64, 64), Payload::ShColor, &RenderConfig::default());
    let p = 32 * 64 + 32;
    assert_eq!(fwd.frame.alpha[p], 1.0);
    for (ch, want) in [0.2, 0.4, 0.6].into_iter().enumerate() {
        assert!((fwd.frame.color[p][ch] - want).abs() < 1e-12);
    }
}

#[test]
fn two_layer_composite() {
    // Kernel is 1 at the splat center, so w equals opacity there.
    let c1 = dc([1.0, 0.0, 0.0]);
    let c2 = dc([0.0, 1.0, 0.0]);
    let s = set(vec![
        prim(Vec3::new(0.0, 0.0, 2.0), 0.02, 0.5, &c2, 1),
        prim(Vec3::new(0.0, 0.0, 1.0), 0.02, 0.6, &c1, 0),
    ]);
    let fwd = render(&s, &cam(64, 64), Payload::ShColor, &RenderConfig::default());
    let p = 32 * 64 + 32;
    let col = fwd.frame.color[p];
    assert!((col[0] - 0.6).abs() < 1e-12);
    assert!((col[1] - 0.2).abs() < 1e-12);
    assert!((fwd.frame.alpha[p] - 0.8).abs() < 1e-12);
}

#[test]
fn kernel_is_continuous_at_cutoff() {
    assert_eq!(kernel(0.0), 1.0);
    assert!(kernel(KERNEL_CUTOFF - 1e-9) < 1e-9);
    assert_eq!(kernel(KERNEL_CUTOFF), 0.0);
}

fn vertical_strand() -> HairModel {
    let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(0.0, -0.1 + 0.04 * i as f64, 1.0)).collect();
    HairModel::new(vec![HairStrand::from_polyline(&pts, 1e-3, 0).unwrap()], 0, 1e-3)
}

#[test]
fn vertical_strand_orientation() {
    let model = vertical_strand();
    let s = PrimitiveSet::from_model(&model, false);
    let (img, _) = render_orientation(&s, &cam(64, 64), &RenderConfig::default());
    let p = 32 * 64 + 32;
    assert!(img.valid[p]);
    assert!(img.dir[p][0].abs() < 1e-9 && (img.dir[p][1] - 1.0).abs() < 1e-9);
    let empty = 32 * 64 + 2;
    assert!(!img.valid[empty]);
    assert_eq!(img.dir[empty], [0.0, 0.0]);
}

fn two_stacked(opacity: f64) -> HairModel {
    let mk = |z: f64| {
        let mut s = HairStrand::from_polyline(&[Vec3::new(-0.05, 0.0, z), Vec3::new(0.05, 0.0, z)], 1e-2, 0).unwrap();
        s.segments[0].set_opacity(opacity);
        s
    };
    HairModel::new(vec![mk(0.0), mk(0.2)], 0, 1e-2)
}

#[test]
fn light_pass_two_opaque() {
    let mut model = two_stacked(1.0);
    // Sigmoid saturates to exactly 1 for large logits.
    for s in &mut model.strands {
        s.segments[0].opacity_logit = 50.0;
    }
    light_pass(&mut model, &Vec3::new(0.0, 0.0, -3.0), &LightPassConfig::default()).unwrap();
    assert_eq!(model.strands[0].segments[0].tau, 1.0);
    assert_eq!(model.strands[1].segments[0].tau, 0.0);
}

#[test]
fn light_pass_single_and_inside() {
    let mut model = two_stacked(1.0);
    model.strands.truncate(1);
    light_pass(&mut model, &Vec3::new(0.0, 0.0, -3.0), &LightPassConfig::default()).unwrap();
    assert_eq!(model.strands[0].segments[0].tau, 1.0);
    let err = light_pass(&mut model, &Vec3::new(0.0, 0.0, 0.01), &LightPassConfig::default());
    assert!(matches!(err, Err(crate::Error::LightInsideBounds { .. })));
}

#[test]
fn light_pass_below_threshold_keeps_one() {
    let mut model = two_stacked(1.0);
    let cfg = LightPassConfig {
        threshold: 1.5,
        ..Default::default()
    };
    model.strands[1].segments[0].tau = 0.3;
    light_pass(&mut model, &Vec3::new(0.0, 0.0, -3.0), &cfg).unwrap();
    assert_eq!(model.strands[1].segments[0].tau, 1.0);
}

/// Random, mostly overlapping Gaussians in front of `cam(64, 64)`.
fn random_prims(rng: &mut ChaCha8Rng, n: usize, sh: &[Vec<[f64; 3]>]) -> Vec<Primitive<'static>> {
    let sh: &'static [Vec<[f64; 3]>] = Box::leak(sh.to_vec().into_boxed_slice());
    (0..n)
        .map(|i| {
            let z = rng.random_range(1.0..3.0);
            let mean = Vec3::new(rng.random_range(-0.3..0.3) * z, rng.random_range(-0.3..0.3) * z, z);
            let a = Matrix3::from_fn(|_, _| rng.random_range(-0.03..0.03));
            Primitive {
                mean,
                cov: a * a.transpose() + Matrix3::identity() * 1e-5,
                opacity: rng.random_range(0.05..0.95),
                direction: Vec3::new(1.0, 0.0, 0.0),
                sh: &sh[i],
                source: Source::Free(i as u32),
            }
        })
        .collect()
}

fn random_sh(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<[f64; 3]>> {
    (0..n)
        .map(|_| dc([rng.random(), rng.random(), rng.random()]))
        .collect()
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 24;
    let sh = random_sh(&mut rng, n);
    let prims = random_prims(&mut rng, n, &sh);
    let camera = cam(64, 64);
    let cfg = RenderConfig {
        early_stop: 0.0,
        background: [0.1, 0.2, 0.3],
        ..Default::default()
    };
    let npx = camera.pixel_count();
    let wc: Vec<[f64; 3]> = (0..npx).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let wa: Vec<f64> = (0..npx).map(|_| rng.random()).collect();
    let loss = |prims: &[Primitive<'_>]| {
        let s = PrimitiveSet { prims: prims.to_vec(), sh_degree: 0 };
        let f = render(&s, &camera, Payload::ShColor, &cfg).frame;
        let mut l = 0.0;
        for p in 0..npx {
            for ch in 0..3 {
                l += wc[p][ch] * f.color[p][ch];
            }
            l += wa[p] * f.alpha[p];
        }
        l
    };
    let s = PrimitiveSet { prims: prims.clone(), sh_degree: 0 };
    let fwd = render(&s, &camera, Payload::ShColor, &cfg);
    let grads = backward(&fwd, &wc, Some(&wa), Exec::Sequential);
        let mut checked = 0;
    for (splat, g) in fwd.splats.iter().zip(&grads).take(8) {
        let i = splat.source_id;
        let pg = project_backward(&camera, splat, &prims[i].cov, g, Vec3::zeros());
        // Small steps: the kernel's slope jumps at the 3σ cutoff.
        let fd = |f: &dyn Fn(&mut Primitive<'_>, f64), eps: f64| {
            let mut a = prims.clone();
            let mut b = prims.clone();
            f(&mut a[i], eps);
            f(&mut b[i], -eps);
            (loss(&a) - loss(&b)) / (2.0 * eps)
        };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-4 * (1.0 + a.abs().max(b.abs()));
        let d_op = fd(&|p, e| p.opacity += e, 1e-6);
        assert!(close(d_op, g.opacity), "opacity {d_op} vs {}", g.opacity);
        for k in 0..3 {
            let d = fd(&|p, e| p.mean[k] += e, 1e-7);
            assert!(close(d, pg.mean[k]), "mean[{k}] {d} vs {}", pg.mean[k]);
        }
        for (r, c) in [(0, 0), (0, 1), (1, 2), (2, 2)] {
            // Symmetric perturbation: the gradient of a symmetric entry is
            // the sum of both off-diagonal slots.
            let d = fd(&|p, e| {
                p.cov[(r, c)] += e;
                if r != c {
                    p.cov[(c, r)] += e;
                }
            }, 1e-8);
            let a = if r == c { pg.cov[(r, c)] } else { pg.cov[(r, c)] + pg.cov[(c, r)] };
            assert!(close(d, a), "cov[{r}{c}] {d} vs {a}");
        }
        checked += 1;
    }
    assert_eq!(checked, 8);
}

#[test]
fn payload_gradient_is_weighted_transmittance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sh = random_sh(&mut rng, 12);
    let prims = random_prims(&mut rng, 12, &sh);
    let camera = cam(64, 64);
    let cfg = RenderConfig::default();
    let s = PrimitiveSet { prims, sh_degree: 0 };
    let fwd = render(&s, &camera, Payload::ShColor, &cfg);
    let ones = vec![[1.0, 0.0, 0.0]; camera.pixel_count()];
    let grads = backward(&fwd, &ones, None, Exec::Parallel);
    let seq = backward(&fwd, &ones, None, Exec::Sequential);
    assert_eq!(grads, seq);
    // Raising one splat's red payload by δ raises total red by δ · grad.
    let k = 0;
    let mut splats = fwd.splats.clone();
    splats[k].payload[0] += 1.0;
    let f2 = tiles::composite(&splats, &fwd.bins, &cfg);
    let gain: f64 = (0..camera.pixel_count()).map(|p| f2.color[p][0] - fwd.frame.color[p][0]).sum();
    assert!((gain - grads[k].payload[0]).abs() < 1e-9);
}
