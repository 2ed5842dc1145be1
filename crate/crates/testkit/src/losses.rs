use ghair_core::math::Vec3;
use ghair_core::model::HairModel;

/// Mean SSIM computed the way the common PyTorch implementation does: a
/// full 11×11 Gaussian window (σ = 1.5) convolved with zero padding, the
/// SSIM map averaged over pixels and channels.
pub fn ssim(x: &[[f64; 3]], y: &[[f64; 3]], w: usize, h: usize) -> f64 {
    const R: isize = 5;
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (a, b) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(a * a + b * b) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    for ch in 0..3 {
        for py in 0..h as isize {
            for px in 0..w as isize {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in -R..=R {
                    for dx in -R..=R {
                        let (qx, qy) = (px + dx, py + dy);
                        if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                            continue;
                        }
                        let k = win[(dy + R) as usize][(dx + R) as usize] / total;
                        let i = qy as usize * w + qx as usize;
                        let (a, b) = (x[i][ch], y[i][ch]);
                        mx += k * a;
                        my += k * b;
                        xx += k * a * a;
                        yy += k * b * b;
                        xy += k * a * b;
                    }
                }
                let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
                sum += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
    }
    sum / (3 * w * h) as f64
}

/// Bidirectional chamfer by exhaustive nearest-neighbour search; returns
/// the position and direction sums.
pub fn chamfer(sp: &[Vec3], sd: &[Vec3], fp: &[Vec3], fd: &[Vec3]) -> (f64, f64) {
    let nearest = |q: &Vec3, set: &[Vec3]| {
        let mut best = (0, f64::INFINITY);
        for (i, p) in set.iter().enumerate() {
            let d = (p - q).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    };
    let (mut pos, mut dir) = (0.0, 0.0);
    for (p, q) in sp.iter().enumerate() {
        let (o, d) = nearest(q, fp);
        pos += d;
        dir += 1.0 - sd[p].dot(&fd[o]);
    }
    for (o, q) in fp.iter().enumerate() {
        let (p, d) = nearest(q, sp);
        pos += d;
        dir += 1.0 - fd[o].dot(&sd[p]);
    }
    (pos, dir)
}

/// Opacity and parameter smoothness by explicit difference sequences.
pub fn smoothness(model: &HairModel) -> (f64, f64) {
    let (mut opa, mut pam) = (0.0, 0.0);
    for s in &model.strands {
        let a: Vec<f64> = s.segments.iter().map(|g| g.opacity()).collect();
        let da: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
        let dda: Vec<f64> = da.windows(2).map(|w| w[1] - w[0]).collect();
        opa += 0.5 * (da.iter().map(|v| v.abs()).sum::<f64>() + dda.iter().map(|v| v.abs()).sum::<f64>());
        for w in s.segments.windows(2) {
            let (u0, u1) = (w[0].direction(), w[1].direction());
            pam += (u1.x - u0.x).abs() + (u1.y - u0.y).abs() + (u1.z - u0.z).abs();
            pam += (w[1].length - w[0].length).abs();
        }
    }
    (opa, pam)
}
