use ghair_core::camera::orbit_ring;
use ghair_core::field::{OrientedField, INITIAL_LENGTH_RATIO};
use ghair_core::grad::GradBuffer;
use ghair_core::grid::PointGrid;
use ghair_core::loss::LossWeights;
use ghair_core::math::{quat_from_z_to, Vec3};
use ghair_core::mesh::TriMesh;
use ghair_core::model::HairModel;
use ghair_core::optim::{self, jitter_direction, DensityConfig, OptimConfig, OptimState};
use ghair_core::pipeline::*;
use ghair_core::raster::{render, render_orientation, Payload, PrimitiveSet, RenderConfig};
use ghair_core::synthetic::{curve_field, helix, perturb, wig_model, wig_scene, WigConfig};
use ghair_testkit::scenes::{hanging_strands, strand_camera};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat_scalp(half: f64) -> TriMesh {
    let v = vec![
        Vec3::new(-half, 0.0, -half),
        Vec3::new(-half, 0.0, half),
        Vec3::new(half, 0.0, half),
        Vec3::new(half, 0.0, -half),
    ];
    TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3]])
}

fn vertical_field(half: f64, spacing: f64, height: f64) -> OrientedField {
    let n = (2.0 * half / spacing).round() as i32;
    let m = (height / spacing).round() as i32;
    let mut columns = Vec::new();
    for i in 0..=n {
        for k in 0..=n {
            let (x, z) = (-half + i as f64 * spacing, -half + k as f64 * spacing);
            columns.push((0..=m).map(|j| Vec3::new(x, j as f64 * spacing, z)).collect::<Vec<_>>());
        }
    }
    curve_field(&columns, 1e-4)
}

fn views_of(field: &OrientedField, cams: &[ghair_core::camera::CameraView], rcfg: &RenderConfig) -> Vec<TrainView> {
    let set = field.primitives();
    cams.iter()
        .map(|c| {
            let f = render(&set, c, Payload::ShColor, rcfg).frame;
            let (o, _) = render_orientation(&set, c, rcfg);
            TrainView {
                cam: c.clone(),
                image: f.color,
                alpha: f.alpha,
                orientation: Some(o),
            }
        })
        .collect()
}

fn median_angle(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.dot(y).abs().min(1.0).acos().to_degrees()).collect();
    e.sort_by(f64::total_cmp);
    e[e.len() / 2]
}

#[test]
fn field_recovers_directions_of_known_cylinders() {
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
    let views = views_of(&gt, &orbit_ring(Vec3::zeros(), 0.4, 0.3, 12, 0.8, 64, 64), &rcfg);
    let mut field = gt.clone();
    for g in &mut field.gaussians {
        g.rotation = quat_from_z_to(&jitter_direction(&g.direction(), 40f64.to_radians(), &mut rng));
    }
    let before = median_angle(&field.directions(), &gt.directions());
    let cfg = OgfConfig {
        iterations: 300,
        ..Default::default()
    };
    let head = TriMesh::uv_sphere(Vec3::zeros(), 0.02, 12, 16);
    let n = field.len();
    let report = fit_ogf(&mut field, &views, None, &cfg, &LossWeights::default(), &rcfg, &mut rng, |_, _| {}).unwrap();
    let after = median_angle(&field.directions(), &gt.directions());
    assert!(after <= 5.0, "median {before:.2} -> {after:.2} deg");
    assert!(report.losses.last().unwrap() < &report.losses[0]);
    assert_eq!(report.removed, 0);

    let removed = field.clean_inside(&head);
    assert!(removed > 0);
    assert_eq!(field.len() + removed, n);
    assert!(field.means.iter().all(|m| head.signed_distance(m) >= 0.0));
}

#[test]
fn field_fit_requires_orientation_maps() {
    let field = curve_field(&[vec![Vec3::zeros(), Vec3::x() * 0.01]], 1e-4);
    let rcfg = RenderConfig::default();
    let mut views = views_of(&field, &orbit_ring(Vec3::zeros(), 0.4, 0.3, 2, 0.8, 16, 16), &rcfg);
    views[1].orientation = None;
    let mut f = field.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = fit_ogf(&mut f, &views, None, &OgfConfig::default(), &LossWeights::default(), &rcfg, &mut rng, |_, _| {});
    assert!(r.is_err());
}

#[test]
fn initial_field_lengths_and_cleaning() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let head = TriMesh::uv_sphere(Vec3::zeros(), 0.1, 16, 24);
    let hair = TriMesh::uv_sphere(Vec3::zeros(), 0.13, 12, 16);
    let cfg = OgfConfig {
        samples: 3000,
        ..Default::default()
    };
    let mut field = init_field(&head, &hair, &cfg, 1, 1e-4, &mut rng).unwrap();
    assert_eq!(field.len(), 3000);
    for g in &field.gaussians {
        assert_eq!(g.length, INITIAL_LENGTH_RATIO * 1e-4);
        assert!((g.length / (0.5 * g.diameter) - 20.0).abs() < 1e-9);
    }
    for _ in 0..500 {
        let p = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        field.push(p, &Vec3::y());
    }
    let removed = field.clean_inside(&head);
    assert!(removed > 0);
    assert!(field.means.iter().all(|m| head.signed_distance(m) >= 0.0));
}

#[test]
fn straight_field_traces_straight_strands() {
    let field = vertical_field(0.012, 0.002, 0.26);
    let cfg = StrandConfig {
        count: 30,
        refine_iterations: 0,
        ..Default::default()
    };
    let scalp = flat_scalp(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = strands_from_field(&field, &scalp, &cfg, 1.0, 0.1, &mut rng).unwrap();
    assert_eq!(model.strands.len(), 30);
    for s in &model.strands {
        let nodes = s.chain_nodes();
        assert_eq!(nodes.len(), cfg.nodes);
        for (k, p) in nodes.iter().enumerate() {
            let expect = s.root + Vec3::y() * (k as f64 * cfg.step);
            assert!((p - expect).norm() <= 1e-6, "node {k}: {p:?} vs {expect:?}");
        }
    }
}

#[test]
fn traced_strands_stay_within_node_limit() {
    let field = vertical_field(0.012, 0.002, 0.4);
    let scalp = flat_scalp(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = StrandConfig {
        count: 20,
        step: 0.001,
        nodes: 150,
        ..Default::default()
    };
    assert!(strands_from_field(&field, &scalp, &cfg, 1.0, 0.1, &mut rng).is_err());
    let cfg = StrandConfig {
        count: 20,
        step: 0.001,
        ..Default::default()
    };
    let model = strands_from_field(&field, &scalp, &cfg, 1.0, 0.1, &mut rng).unwrap();
    assert!(!model.strands.is_empty());
    assert!(model.strands.iter().all(|s| s.node_count() <= 100));
    assert!(model.scalp.is_some());
}

#[test]
fn helix_field_traces_the_helix() {
    let curve = helix(0.02, 0.05, 2.0, 4000);
    let field = curve_field(std::slice::from_ref(&curve), 1e-4);
    let cfg = StrandConfig::default();
    let grid = PointGrid::new(&field.means);
    let start = (curve[1] - curve[0]).normalize();
    let line = trace_strand(&grid, &field.directions(), curve[0], start, &cfg);
    assert_eq!(line.len(), cfg.nodes);
    let dense = PointGrid::new(&curve);
    let ms: f64 = line.iter().map(|p| dense.nearest(p).unwrap().1.powi(2)).sum::<f64>() / line.len() as f64;
    assert!(ms.sqrt() <= 2.0 * cfg.step, "rms {}", ms.sqrt());
}

#[test]
fn geometry_refinement_reduces_chamfer() {
    let curve = helix(0.02, 0.05, 1.0, 2000);
    let field = curve_field(std::slice::from_ref(&curve), 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lines = vec![curve
        .iter()
        .step_by(30)
        .enumerate()
        .map(|(k, p)| if k == 0 { *p } else { p + Vec3::new(rng.random_range(-1.0..1.0), 0.0, rng.random_range(-1.0..1.0)) * 1e-3 })
        .collect::<Vec<_>>()];
    let root = lines[0][0];
    let history = refine_geo(&mut lines, &field, 1.0, 0.1, 100, 2e-5).unwrap();
    assert!(history.windows(2).all(|w| w[1] <= w[0]));
    assert!(history.last().unwrap() < &(0.5 * history[0]), "{} -> {}", history[0], history.last().unwrap());
    assert_eq!(lines[0][0], root);
}

fn small_wig() -> (HairModel, WigConfig) {
    let cfg = WigConfig {
        strands: 40,
        nodes: 8,
        head_gaussians: 60,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (wig_model(&cfg, &mut rng).0, cfg)
}

fn on_scalp(model: &HairModel) -> bool {
    let scalp = model.scalp.as_ref().unwrap();
    model
        .strands
        .iter()
        .all(|s| (scalp.closest_point(&s.root).unwrap().position - s.root).norm() <= 1e-9)
}

#[test]
fn density_control_keeps_roots_on_scalp() {
    let (mut model, _) = small_wig();
    let original = model.clone();
    assert!(on_scalp(&model));
    let mut state = OptimState::new(&model, &OptimConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for g in state.grad_accum.iter_mut() {
        *g = rng.random::<f64>();
    }
    state.accum_steps = 1;
    for g in &mut model.strands[5].segments {
        g.opacity_logit = -1e3;
    }
    let cfg = DensityConfig {
        dup_quantile: 0.8,
        ..Default::default()
    };
    let r = optim::density_control(&mut model, &mut state, &cfg, &mut rng);
    assert_eq!(r.pruned, 1);
    assert!(r.duplicated > 0);
    assert_eq!(model.strands.len(), original.strands.len() - 1 + r.duplicated);
    assert!(on_scalp(&model));
    assert_eq!(model.head, original.head);
    let kept: Vec<_> = original.strands.iter().enumerate().filter(|(i, _)| *i != 5).map(|(_, s)| s.root).collect();
    let now: Vec<_> = model.strands.iter().map(|s| s.root).collect();
    assert_eq!(&now[..kept.len()], &kept[..]);
    assert_eq!(state.initial_length.len(), model.strands.len());
    assert_eq!(state.grad_accum, vec![0.0; model.strands.len()]);
}

#[test]
fn density_control_without_triggers_is_identity() {
    let (mut model, _) = small_wig();
    let original = model.clone();
    let mut state = OptimState::new(&model, &OptimConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let r = optim::density_control(&mut model, &mut state, &DensityConfig::default(), &mut rng);
    assert_eq!((r.pruned, r.duplicated), (0, 0));
    assert_eq!(model, original);
}

#[test]
fn quaternions_stay_normalized_under_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut model = hanging_strands(&mut rng, 4, 6, 1, 1e-4);
    let mut state = OptimState::new(&model, &OptimConfig::default());
    let n = model.segment_count();
    for _ in 0..1000 {
        let mut g = GradBuffer::zeros(n, 4);
        for i in 0..n {
            g.rotation[i] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            g.length[i] = rng.random_range(-1.0..1.0);
        }
        optim::step(&mut model, &g, &mut state).unwrap();
        for seg in model.strands.iter().flat_map(|s| &s.segments) {
            let q = seg.rotation;
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
    for (s, lens) in model.strands.iter().zip(&state.initial_length) {
        for (g, l0) in s.segments.iter().zip(lens) {
            assert!(g.length >= 0.1 * l0 * (1.0 - 1e-12) && g.length <= 10.0 * l0 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn learning_rate_decay_and_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut model = hanging_strands(&mut rng, 3, 5, 0, 1e-4);
    let original = model.clone();
    let cfg = OptimConfig {
        gamma: 0.97,
        ..Default::default()
    };
    let mut state = OptimState::new(&model, &cfg);
    let zero = GradBuffer::zeros(model.segment_count(), 1);
    let mut product = 1.0;
    for n in 1..=200 {
        optim::step(&mut model, &zero, &mut state).unwrap();
        product *= 0.97;
        assert_eq!(state.lr.rotation, cfg.lr.rotation * 0.97f64.powi(n));
        assert_eq!(state.lr.length, cfg.lr.length * 0.97f64.powi(n));
        assert!((state.lr.rotation / (cfg.lr.rotation * product) - 1.0).abs() <= 1e-12);
        assert_eq!(state.lr.sh, cfg.lr.sh);
        assert_eq!(state.lr.opacity, cfg.lr.opacity);
    }
    assert_eq!(model.strands, original.strands);
}

#[test]
fn transparent_segments_get_no_color_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut model = hanging_strands(&mut rng, 6, 8, 1, 1e-4);
    for g in &mut model.strands[2].segments {
        g.opacity_logit = -1e3;
    }
    let cam = strand_camera(32);
    let rcfg = RenderConfig::default();
    let other = hanging_strands(&mut rng, 6, 8, 1, 1e-4);
    let target = render(&PrimitiveSet::from_model(&other, true), &cam, Payload::ShColor, &rcfg).frame;
    let view = TrainView {
        cam,
        image: target.color,
        alpha: target.alpha,
        orientation: None,
    };
    let (_, g) = view_gradient(&model, &view, &LossWeights::default(), &rcfg).unwrap();
    let base = 2 * 8;
    for i in base..base + 8 {
        assert!(g.sh[i].iter().all(|c| *c == [0.0; 3]));
    }
    assert!(g.sh.iter().flatten().any(|c| *c != [0.0; 3]));
}

#[test]
fn appearance_fitting_is_monotone_over_windows() {
    let cfg = WigConfig {
        strands: 80,
        nodes: 10,
        head_gaussians: 100,
        views: 8,
        width: 48,
        height: 48,
        ..Default::default()
    };
    let rcfg = RenderConfig::default();
    let scene = wig_scene(&cfg, &rcfg);
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
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut model = perturb(&scene.model, 0.0, &mut rng);
    let optim_cfg = OptimConfig::default();
    let mut state = OptimState::new(&model, &optim_cfg);
    let fine = FineConfig {
        iterations: 200,
        views_per_step: views.len(),
        optimize_geometry: false,
        ..Default::default()
    };
    let density = DensityConfig {
        enabled: false,
        ..Default::default()
    };
    let geometry: Vec<_> = model.strands.iter().map(|s| s.chain_nodes()).collect();
    let r = run_fine(&mut model, &views, &fine, &LossWeights::default(), &rcfg, &density, &mut state, &mut rng, |_, _| {}).unwrap();
    let smooth: Vec<f64> = r.losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    for k in 0..smooth.len() - 50 {
        assert!(smooth[k + 50] <= smooth[k], "step {k}: {} -> {}", smooth[k], smooth[k + 50]);
    }
    assert!(r.losses.last().unwrap() < &(0.5 * r.losses[0]));
    let after: Vec<_> = model.strands.iter().map(|s| s.chain_nodes()).collect();
    assert_eq!(after, geometry);
}
