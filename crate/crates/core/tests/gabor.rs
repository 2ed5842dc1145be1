use std::f64::consts::PI;

use ghair_core::gabor::{gabor_orientation, GaborConfig, Gray};
use ghair_core::raster::OrientationImage;

fn pattern(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> Gray {
    let data = (0..w * h).map(|i| f((i % w) as f64, (i / w) as f64)).collect();
    Gray { width: w, height: h, data }
}

fn stripes(w: usize, h: usize, normal: f64, period: f64) -> Gray {
    let (c, s) = (normal.cos(), normal.sin());
    pattern(w, h, |x, y| 0.5 + 0.4 * (2.0 * PI * (x * c + y * s) / period).cos())
}

/// Angle between line directions, wrapped to (−π/2, π/2].
fn line_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % PI;
    if d <= -PI / 2.0 {
        d += PI;
    } else if d > PI / 2.0 {
        d -= PI;
    }
    d
}

fn angle_at(o: &OrientationImage, p: usize) -> f64 {
    o.dir[p][1].atan2(o.dir[p][0])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn vertical_stripes_read_ninety_degrees() {
    let o = gabor_orientation(&stripes(64, 64, 0.0, 4.0), None, &GaborConfig::default()).unwrap();
    let valid: Vec<usize> = (0..o.dir.len()).filter(|&p| o.valid[p]).collect();
    assert!(valid.len() >= o.dir.len() * 9 / 10);
    let good = valid
        .iter()
        .filter(|&&p| line_diff(angle_at(&o, p), PI / 2.0).abs() <= 2f64.to_radians())
        .count();
    assert!(good as f64 >= 0.99 * valid.len() as f64, "{good}/{}", valid.len());
}

#[test]
fn stripe_angle_sweep() {
    for k in 0..12 {
        let normal = k as f64 * PI / 12.0 + 0.05;
        let o = gabor_orientation(&stripes(56, 56, normal, 4.0), None, &GaborConfig::default()).unwrap();
        let errs: Vec<f64> = (0..o.dir.len())
            .filter(|&p| o.valid[p])
            .map(|p| line_diff(angle_at(&o, p), normal + PI / 2.0).abs())
            .collect();
        assert!(median(errs).to_degrees() <= 2.0, "normal {normal}");
    }
}

#[test]
fn uniform_gray_is_all_invalid() {
    for v in [0.0, 0.3, 1.0] {
        let o = gabor_orientation(&pattern(40, 30, |_, _| v), None, &GaborConfig::default()).unwrap();
        assert_eq!(o.valid_count(), 0);
    }
}

#[test]
fn rotation_by_thirty_degrees() {
    let (w, h) = (96usize, 96usize);
    let c = (0.5 * (w - 1) as f64, 0.5 * (h - 1) as f64);
    let rings = |x: f64, y: f64| {
        let r = ((x - c.0 - 9.0).powi(2) + (y - c.1 + 6.0).powi(2)).sqrt();
        0.5 + 0.4 * (2.0 * PI * r / 5.0).cos()
    };
    let rot = 30f64.to_radians();
    let (cs, sn) = (rot.cos(), rot.sin());
    let back = |x: f64, y: f64| {
        let (dx, dy) = (x - c.0, y - c.1);
        (c.0 + cs * dx + sn * dy, c.1 - sn * dx + cs * dy)
    };
    let a = pattern(w, h, rings);
    let b = pattern(w, h, |x, y| {
        let (u, v) = back(x, y);
        rings(u, v)
    });
    let cfg = GaborConfig::default();
    let oa = gabor_orientation(&a, None, &cfg).unwrap();
    let ob = gabor_orientation(&b, None, &cfg).unwrap();
    let mut diffs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            if (fx - c.0).hypot(fy - c.1) > 30.0 {
                continue;
            }
            let (u, v) = back(fx, fy);
            let q = v.round() as usize * w + u.round() as usize;
            let p = y * w + x;
            if oa.valid[q] && ob.valid[p] {
                diffs.push(line_diff(angle_at(&ob, p), angle_at(&oa, q)));
            }
        }
    }
    assert!(diffs.len() > 2000, "{}", diffs.len());
    let m = median(diffs).to_degrees();
    assert!((m - 30.0).abs() <= 3.0, "median rotation {m}");
}

#[test]
fn brightness_scale_and_unit_vectors() {
    let a = pattern(48, 48, |x, y| 0.5 + 0.4 * ((x * 0.9 + y * 0.4) + 0.02 * x * y).sin());
    let b = Gray {
        data: a.data.iter().map(|v| 3.0 * v).collect(),
        ..a.clone()
    };
    let cfg = GaborConfig::default();
    let (oa, ob) = (gabor_orientation(&a, None, &cfg).unwrap(), gabor_orientation(&b, None, &cfg).unwrap());
    assert_eq!(oa.valid, ob.valid);
    for p in 0..oa.dir.len() {
        if oa.valid[p] {
            assert!((oa.dir[p][0] - ob.dir[p][0]).abs() <= 1e-9 && (oa.dir[p][1] - ob.dir[p][1]).abs() <= 1e-9);
            let n = oa.dir[p][0].hypot(oa.dir[p][1]);
            assert!((n - 1.0).abs() <= 1e-6);
            assert!((0.0..=1.0).contains(&oa.confidence[p]));
        }
    }
}

#[test]
fn mask_limits_valid_pixels() {
    let img = stripes(40, 40, 0.4, 4.0);
    let mask: Vec<bool> = (0..1600).map(|i| (i % 40) < 20).collect();
    let o = gabor_orientation(&img, Some(&mask), &GaborConfig::default()).unwrap();
    assert!(o.valid_count() > 0);
    assert!((0..1600).all(|p| mask[p] || !o.valid[p]));
    assert!(gabor_orientation(&img, Some(&vec![false; 1600]), &GaborConfig::default()).is_err());
    assert!(gabor_orientation(&img, Some(&[true; 10]), &GaborConfig::default()).is_err());
}
