//! Uniform hash grid for nearest-neighbor queries, and the oriented
//! chamfer distance built on it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::Vec3;

type Cell = (i64, i64, i64);

pub struct PointGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<Cell, Vec<u32>>,
    lo: Cell,
    hi: Cell,
}

impl<'a> PointGrid<'a> {
    /// Grid with cells sized for roughly `per_cell` points each.
    pub fn new(points: &'a [Vec3]) -> Self {
        let cell = Self::auto_cell(points, 2.0);
        Self::with_cell(points, cell)
    }

    fn auto_cell(points: &[Vec3], per_cell: f64) -> f64 {
        if points.len() < 2 {
            return 1.0;
        }
        let (lo, hi) = points
            .iter()
            .fold((points[0], points[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let ext = hi - lo;
        let dims: Vec<f64> = ext.iter().copied().filter(|e| *e > 1e-12).collect();
        if dims.is_empty() {
            return 1.0;
        }
        let vol: f64 = dims.iter().product();
        let cells = (points.len() as f64 / per_cell).max(1.0);
        let c = (vol / cells).powf(1.0 / dims.len() as f64);
        c.max(1e-9)
    }

    pub fn with_cell(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<u32>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let c = key(p, cell);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            cells.entry(c).or_default().push(i as u32);
        }
        Self {
            points,
            cell,
            cells,
            lo,
            hi,
        }
    }

    pub fn points(&self) -> &[Vec3] {
        self.points
    }

    /// Nearest point and its distance; ties go to the lower index.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let c = key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        // Shell radius beyond which no cell can be occupied.
        let max_r = [
            (c.0 - self.lo.0).abs(),
            (c.0 - self.hi.0).abs(),
            (c.1 - self.lo.1).abs(),
            (c.1 - self.hi.1).abs(),
            (c.2 - self.lo.2).abs(),
            (c.2 - self.hi.2).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        // Shells closer than the occupied box hold no cells.
        let outside = |v: i64, lo: i64, hi: i64| (lo - v).max(v - hi).max(0);
        let min_r = outside(c.0, self.lo.0, self.hi.0)
            .max(outside(c.1, self.lo.1, self.hi.1))
            .max(outside(c.2, self.lo.2, self.hi.2));
        for r in min_r..=max_r {
            if let Some((_, d)) = best {
                // Every cell in shell r is at least (r - 1) cells away.
                if (r - 1) as f64 * self.cell > d {
                    break;
                }
            }
            self.visit_shell(c, r, |i| {
                let d2 = (self.points[i] - q).norm_squared();
                let better = match best {
                    None => true,
                    Some((bi, bd)) => d2 < bd * bd || (d2 == bd * bd && i < bi),
                };
                if better {
                    best = Some((i, d2.sqrt()));
                }
            });
        }
        best
    }

    /// Indices of points within `radius` of `q`.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let c = key(q, self.cell);
        let r = (radius / self.cell).ceil() as i64;
        let mut out = Vec::new();
        for x in (c.0 - r).max(self.lo.0)..=(c.0 + r).min(self.hi.0) {
            for y in (c.1 - r).max(self.lo.1)..=(c.1 + r).min(self.hi.1) {
                for z in (c.2 - r).max(self.lo.2)..=(c.2 + r).min(self.hi.2) {
                    if let Some(list) = self.cells.get(&(x, y, z)) {
                        for &i in list {
                            if (self.points[i as usize] - q).norm() <= radius {
                                out.push(i as usize);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Visit the points of every occupied cell at Chebyshev distance `r`
    /// from `c`, clipped to the occupied bounding box.
    fn visit_shell(&self, c: Cell, r: i64, mut f: impl FnMut(usize)) {
        let (lo, hi) = (self.lo, self.hi);
        let mut visit = |x: i64, y: i64, z: i64| {
            if let Some(list) = self.cells.get(&(x, y, z)) {
                list.iter().for_each(|&i| f(i as usize));
            }
        };
        for x in (c.0 - r).max(lo.0)..=(c.0 + r).min(hi.0) {
            for y in (c.1 - r).max(lo.1)..=(c.1 + r).min(hi.1) {
                if (x - c.0).abs() == r || (y - c.1).abs() == r {
                    for z in (c.2 - r).max(lo.2)..=(c.2 + r).min(hi.2) {
                        visit(x, y, z);
                    }
                } else {
                    for z in [c.2 - r, c.2 + r] {
                        if (lo.2..=hi.2).contains(&z) {
                            visit(x, y, z);
                        }
                        if r == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }
}

fn key(p: &Vec3, cell: f64) -> Cell {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Oriented chamfer distance between strand samples `P` and field samples
/// `O`, both given as (position, unit direction):
/// `Σ_p (‖p − u_o‖ + (1 − d_p·d_o)) + Σ_o (‖u_o − p‖ + (1 − d_o·d_p))`
/// with each sum taken at the nearest neighbor in the other set.
#[derive(Clone, Debug, Default)]
pub struct Chamfer {
    pub pos: f64,
    pub dir: f64,
    /// Gradient of `w_pos·pos + w_dir·dir` w.r.t. each strand position.
    pub d_pos: Vec<Vec3>,
    /// Gradient of `w_pos·pos + w_dir·dir` w.r.t. each strand direction.
    pub d_dir: Vec<Vec3>,
}

impl Chamfer {
    pub fn value(&self, w_pos: f64, w_dir: f64) -> f64 {
        w_pos * self.pos + w_dir * self.dir
    }
}

pub fn chamfer(
    strand_pos: &[Vec3],
    strand_dir: &[Vec3],
    field_pos: &[Vec3],
    field_dir: &[Vec3],
    w_pos: f64,
    w_dir: f64,
) -> Result<Chamfer> {
    if strand_pos.is_empty() {
        return Err(Error::Empty("strand samples"));
    }
    if field_pos.is_empty() {
        return Err(Error::Empty("field samples"));
    }
    let fg = PointGrid::new(field_pos);
    let sg = PointGrid::new(strand_pos);
    let mut out = Chamfer {
        d_pos: vec![Vec3::zeros(); strand_pos.len()],
        d_dir: vec![Vec3::zeros(); strand_pos.len()],
        ..Default::default()
    };
    let mut add = |p: usize, o: usize, dist: f64| {
        out.pos += dist;
        out.dir += 1.0 - strand_dir[p].dot(&field_dir[o]);
        if dist > 0.0 {
            out.d_pos[p] += w_pos * (strand_pos[p] - field_pos[o]) / dist;
        }
        out.d_dir[p] -= w_dir * field_dir[o];
    };
    for (p, q) in strand_pos.iter().enumerate() {
        let (o, d) = fg.nearest(q).expect("non-empty");
        add(p, o, d);
    }
    for (o, q) in field_pos.iter().enumerate() {
        let (p, d) = sg.nearest(q).expect("non-empty");
        add(p, o, d);
    }
    Ok(out)
}
