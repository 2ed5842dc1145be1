use ghair_core::math::{self, Vec3};
use ghair_core::model::{cylinder_covariance, CylindricalGaussian, HairStrand};
use ghair_testkit::scenes::random_rotation;
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_strand(seed: u64, segments: usize) -> HairStrand {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = HairStrand {
        root: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        segments: Vec::new(),
    };
    for _ in 0..segments {
        let mut g = CylindricalGaussian::new(&Vec3::z(), rng.random_range(1e-3..0.05), 1e-4, 0);
        g.rotation = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        s.segments.push(g);
    }
    s
}

fn sorted_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    [e[0], e[1], e[2]]
}

#[test]
fn chain_examples() {
    let s = HairStrand::from_polyline(
        &[Vec3::zeros(), Vec3::new(0.0, 0.0, 0.01), Vec3::new(0.0, 0.0, 0.02)],
        1e-4,
        0,
    )
    .unwrap();
    let nodes = s.chain_nodes();
    assert_eq!(nodes.len(), 3);
    assert!((nodes[2] - Vec3::new(0.0, 0.0, 0.02)).norm() < 1e-15);
    assert!((s.centers()[0] - Vec3::new(0.0, 0.0, 0.005)).norm() < 1e-15);

    let x = HairStrand::from_polyline(&[Vec3::zeros(), Vec3::x()], 1e-4, 0).unwrap();
    assert!((x.chain_nodes()[1] - Vec3::x()).norm() < 1e-15);
    let r = math::rotation_matrix(&x.segments[0].rotation);
    let quarter_about_y = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
    assert!((r - quarter_about_y).abs().max() < 1e-12);
}

#[test]
fn random_polyline_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = Vec3::zeros();
    let pts: Vec<Vec3> = (0..100)
        .map(|_| {
            p += Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.01;
            p
        })
        .collect();
    let s = HairStrand::from_polyline(&pts, 1e-4, 0).unwrap();
    let err = s.chain_nodes().iter().zip(&pts).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-9, "{err}");
}

proptest! {
    #[test]
    fn covariance_eigenvalues(q in prop::array::uniform4(-1.0f64..1.0), s in 1e-4f64..0.5) {
        prop_assume!(math::quat_norm(&q) > 1e-3);
        let u = math::quat_axis_z(&q);
        let c = cylinder_covariance(&u, 1e-4, s);
        prop_assert!((c - c.transpose()).abs().max() == 0.0);
        let e = sorted_eigenvalues(&c);
        let mut want = [1e-8, 1e-8, s * s];
        want.sort_by(f64::total_cmp);
        for k in 0..3 {
            prop_assert!((e[k] - want[k]).abs() <= 1e-12, "{e:?} vs {want:?}");
        }
    }

    #[test]
    fn chaining_closure(seed in any::<u64>(), n in 1usize..40) {
        let s = random_strand(seed, n);
        let nodes = s.chain_nodes();
        let mut acc = s.root;
        prop_assert_eq!(nodes[0], s.root);
        for (i, g) in s.segments.iter().enumerate() {
            acc += g.direction() * g.length;
            prop_assert_eq!(nodes[i + 1], acc);
            let c = s.centers()[i];
            prop_assert!((c - (nodes[i] + 0.5 * g.length * g.direction())).norm() <= 1e-15);
            let e = sorted_eigenvalues(&g.covariance());
            prop_assert!((e[2] - g.length * g.length).abs() <= 1e-12);
            prop_assert!((e[0] - 1e-8).abs() <= 1e-12 && (e[1] - 1e-8).abs() <= 1e-12);
        }
    }

    #[test]
    fn rigid_motion_equivariance(seed in any::<u64>(), n in 1usize..40) {
        let s = random_strand(seed, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let r = random_rotation(&mut rng);
        let t = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let moved = s.transformed(&r, &t);
        for (a, b) in s.chain_nodes().iter().zip(moved.chain_nodes()) {
            prop_assert!(((r * a + t) - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn polyline_inverts_chaining(seed in any::<u64>(), n in 1usize..40) {
        let s = random_strand(seed, n);
        let back = HairStrand::from_polyline(&s.chain_nodes(), 1e-4, 0).unwrap();
        for (a, b) in s.segments.iter().zip(&back.segments) {
            prop_assert!((a.length - b.length).abs() <= 1e-9);
            prop_assert!((a.direction() - b.direction()).norm() <= 1e-9);
        }
    }
}
