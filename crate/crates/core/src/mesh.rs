//! Triangle meshes: OBJ ingestion, area-weighted sampling, closest-point
//! queries and a winding-number inside test.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// A point on a mesh surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub triangle: usize,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::z()
        }
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Parse the `v` and `f` records of a Wavefront OBJ file. Faces with
    /// more than three corners are fan-triangulated.
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut mesh = TriMesh::default();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse(format!("obj line {}: {e}", lineno + 1)))?;
                    if c.len() != 3 {
                        return Err(Error::Parse(format!("obj line {}: short vertex", lineno + 1)));
                    }
                    mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|e| Error::Parse(format!("obj line {}: {e}", lineno + 1)))?;
                        let i = if i < 0 {
                            mesh.vertices.len() as i64 + i
                        } else {
                            i - 1
                        };
                        if i < 0 || i as usize >= mesh.vertices.len() {
                            return Err(Error::Parse(format!(
                                "obj line {}: vertex index out of range",
                                lineno + 1
                            )));
                        }
                        idx.push(i as u32);
                    }
                    for k in 1..idx.len().saturating_sub(1) {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }

    pub fn read_obj(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::parse_obj(&text)
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }

    /// Uniform (area-weighted) random surface samples.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<SurfacePoint> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut cdf = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0;
        for t in 0..self.triangles.len() {
            acc += self.area(t);
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let r = rng.random::<f64>() * acc;
                let t = cdf.partition_point(|&c| c < r).min(cdf.len() - 1);
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                let [a, b, c] = self.corners(t);
                SurfacePoint {
                    position: a + (b - a) * u + (c - a) * v,
                    normal: self.face_normal(t),
                    triangle: t,
                }
            })
            .collect()
    }

    /// Closest surface point (brute force over triangles).
    pub fn closest_point(&self, p: &Vec3) -> Option<SurfacePoint> {
        let mut best: Option<(f64, SurfacePoint)> = None;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
                best = Some((
                    d2,
                    SurfacePoint {
                        position: q,
                        normal: self.face_normal(t),
                        triangle: t,
                    },
                ));
            }
        }
        best.map(|(_, s)| s)
    }

    /// Generalized winding number of a closed, outward-oriented mesh
    /// around `p`: ~1 inside, ~0 outside.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Signed distance: negative inside the (closed) mesh.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let d = self
            .closest_point(p)
            .map(|s| (s.position - p).norm())
            .unwrap_or(f64::INFINITY);
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }

    /// Axis-aligned bounds, `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Closed UV sphere with outward-facing triangles.
    pub fn uv_sphere(center: Vec3, radius: f64, rings: usize, sectors: usize) -> Self {
        let mut vertices = vec![center + Vec3::new(0.0, radius, 0.0)];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..sectors {
                let th = 2.0 * std::f64::consts::PI * s as f64 / sectors as f64;
                vertices.push(
                    center
                        + Vec3::new(phi.sin() * th.cos(), phi.cos(), phi.sin() * th.sin()) * radius,
                );
            }
        }
        vertices.push(center - Vec3::new(0.0, radius, 0.0));
        let bottom = (vertices.len() - 1) as u32;
        let ring = |r: usize, s: usize| (1 + (r - 1) * sectors + s % sectors) as u32;
        let mut triangles = Vec::new();
        for s in 0..sectors {
            triangles.push([0, ring(1, s + 1), ring(1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..sectors {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            }
        }
        for s in 0..sectors {
            triangles.push([bottom, ring(rings - 1, s), ring(rings - 1, s + 1)]);
        }
        Self::new(vertices, triangles)
    }

    /// Sub-mesh of the triangles whose centroid satisfies `keep`.
    pub fn filter_triangles(&self, keep: impl Fn(&Vec3) -> bool) -> Self {
        let triangles = (0..self.triangles.len())
            .filter(|&t| {
                let [a, b, c] = self.corners(t);
                keep(&((a + b + c) / 3.0))
            })
            .map(|t| self.triangles[t])
            .collect();
        Self::new(self.vertices.clone(), triangles)
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
