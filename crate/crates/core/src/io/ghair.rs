//! GHAIR binary hair model format (little-endian).
//!
//! ```text
//! "GHAIR1\0\0"  u32 strands  u32 nodes_per_strand  u32 sh_degree  f32 diameter
//! per strand:   f32×3 root, then (nodes − 1) × segment
//! segment:      f32×4 quaternion (w,x,y,z), f32 length, f32 opacity logit,
//!               f32×3×(deg+1)² SH, f32 tau
//! u32 head count, then per head Gaussian:
//!               f32×3 mean, f32×4 quaternion, f32×3 scale, f32 opacity logit,
//!               f32×3×(deg+1)² SH
//! ```
//!
//! Values are stored at f32 precision; a model whose values are all
//! representable in f32 round-trips exactly.

use std::path::Path;

use super::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::{CylindricalGaussian, HairModel, HairStrand, HeadGaussian};
use crate::sh;

pub const MAGIC: &[u8; 8] = b"GHAIR1\0\0";
pub const HEADER_LEN: usize = 24;

pub fn encode(model: &HairModel) -> Result<Vec<u8>> {
    let nodes = match model.nodes_per_strand() {
        Some(n) => n,
        None if model.strands.is_empty() => 1,
        None => {
            let first = model.strands[0].node_count();
            let other = model.strands.iter().map(|s| s.node_count()).find(|&n| n != first).unwrap();
            return Err(Error::NonUniformStrands { first, other });
        }
    };
    let nc = sh::coeff_count(model.sh_degree);
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(model.strands.len() as u32);
    w.u32(nodes as u32);
    w.u32(model.sh_degree as u32);
    w.f32(model.diameter);
    for s in &model.strands {
        for v in s.root.iter() {
            w.f32(*v);
        }
        for g in &s.segments {
            if g.sh.len() != nc {
                return Err(Error::InvalidParam("segment SH count differs from model degree".into()));
            }
            g.rotation.iter().for_each(|v| w.f32(*v));
            w.f32(g.length);
            w.f32(g.opacity_logit);
            for c in &g.sh {
                c.iter().for_each(|v| w.f32(*v));
            }
            w.f32(g.tau);
        }
    }
    w.u32(model.head.len() as u32);
    for h in &model.head {
        if h.sh.len() != nc {
            return Err(Error::InvalidParam("head SH count differs from model degree".into()));
        }
        h.mean.iter().for_each(|v| w.f32(*v));
        h.rotation.iter().for_each(|v| w.f32(*v));
        h.scale.iter().for_each(|v| w.f32(*v));
        w.f32(h.opacity_logit);
        for c in &h.sh {
            c.iter().for_each(|v| w.f32(*v));
        }
    }
    Ok(w.buf)
}

fn vec3(r: &mut ByteReader<'_>) -> Result<Vec3> {
    Ok(Vec3::new(r.f32()? as f64, r.f32()? as f64, r.f32()? as f64))
}

fn quat(r: &mut ByteReader<'_>) -> Result<[f64; 4]> {
    Ok([r.f32()? as f64, r.f32()? as f64, r.f32()? as f64, r.f32()? as f64])
}

fn coeffs(r: &mut ByteReader<'_>, n: usize) -> Result<Vec<[f64; 3]>> {
    (0..n)
        .map(|_| Ok([r.f32()? as f64, r.f32()? as f64, r.f32()? as f64]))
        .collect()
}

pub fn decode(bytes: &[u8]) -> Result<HairModel> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(MAGIC.len().min(bytes.len()))?;
    if magic != MAGIC {
        if magic.starts_with(b"GHAIR") {
            let found = String::from_utf8_lossy(magic).trim_end_matches('\0').to_string();
            return Err(Error::VersionMismatch {
                found,
                expected: "GHAIR1".into(),
            });
        }
        if magic.len() < MAGIC.len() && MAGIC.starts_with(magic) {
            return Err(Error::Truncated {
                offset: 0,
                needed: MAGIC.len(),
                available: magic.len(),
            });
        }
        return Err(Error::BadMagic(magic.to_vec()));
    }
    let n = r.u32()? as usize;
    let nodes = r.u32()? as usize;
    let degree = r.u32()? as usize;
    if degree > sh::MAX_DEGREE {
        return Err(Error::Parse(format!("SH degree {degree} exceeds {}", sh::MAX_DEGREE)));
    }
    if nodes == 0 {
        return Err(Error::Parse("nodes per strand must be at least 1".into()));
    }
    let diameter = r.f32()? as f64;
    let nc = sh::coeff_count(degree);
    let seg_bytes = 4 * (4 + 2 + 3 * nc + 1);
    let strand_bytes = 12 + (nodes - 1) * seg_bytes;
    if n.checked_mul(strand_bytes).is_none_or(|b| b > r.remaining()) {
        return Err(Error::Truncated {
            offset: r.offset(),
            needed: n.saturating_mul(strand_bytes),
            available: r.remaining(),
        });
    }
    let mut strands = Vec::with_capacity(n);
    for _ in 0..n {
        let root = vec3(&mut r)?;
        let mut segments = Vec::with_capacity(nodes - 1);
        for _ in 1..nodes {
            let rotation = quat(&mut r)?;
            let length = r.f32()? as f64;
            let opacity_logit = r.f32()? as f64;
            let sh = coeffs(&mut r, nc)?;
            let tau = r.f32()? as f64;
            segments.push(CylindricalGaussian {
                rotation,
                length,
                diameter,
                opacity_logit,
                sh,
                tau,
            });
        }
        strands.push(HairStrand { root, segments });
    }
    let heads = r.u32()? as usize;
    let head_bytes = 4 * (3 + 4 + 3 + 1 + 3 * nc);
    if heads.checked_mul(head_bytes).is_none_or(|b| b > r.remaining()) {
        return Err(Error::Truncated {
            offset: r.offset(),
            needed: heads.saturating_mul(head_bytes),
            available: r.remaining(),
        });
    }
    let mut head = Vec::with_capacity(heads);
    for _ in 0..heads {
        head.push(HeadGaussian {
            mean: vec3(&mut r)?,
            rotation: quat(&mut r)?,
            scale: vec3(&mut r)?,
            opacity_logit: r.f32()? as f64,
            sh: coeffs(&mut r, nc)?,
        });
    }
    r.finish()?;
    let mut model = HairModel::new(strands, degree, diameter);
    model.head = head;
    Ok(model)
}

pub fn write(model: &HairModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<HairModel> {
    decode(&super::read_bytes(path)?)
}

/// Round every parameter to f32 so the model survives a file round trip
/// unchanged.
pub fn quantize(model: &mut HairModel) {
    let q = |v: &mut f64| *v = *v as f32 as f64;
    q(&mut model.diameter);
    for s in &mut model.strands {
        s.root.iter_mut().for_each(q);
        for g in &mut s.segments {
            g.rotation.iter_mut().for_each(q);
            q(&mut g.length);
            g.diameter = model.diameter;
            q(&mut g.opacity_logit);
            g.sh.iter_mut().flatten().for_each(q);
            q(&mut g.tau);
        }
    }
    for h in &mut model.head {
        h.mean.iter_mut().for_each(q);
        h.rotation.iter_mut().for_each(q);
        h.scale.iter_mut().for_each(q);
        q(&mut h.opacity_logit);
        h.sh.iter_mut().flatten().for_each(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_is_header_plus_count() {
        let m = HairModel::new(Vec::new(), 0, 1e-4);
        let b = encode(&m).unwrap();
        assert_eq!(b.len(), HEADER_LEN + 4);
        let back = decode(&b).unwrap();
        assert_eq!(back.strands.len(), 0);
        assert_eq!(encode(&back).unwrap(), b);
    }

    #[test]
    fn version_and_magic_errors() {
        let m = HairModel::new(Vec::new(), 0, 1e-4);
        let mut b = encode(&m).unwrap();
        b[5] = b'2';
        assert!(matches!(decode(&b), Err(Error::VersionMismatch { .. })));
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::BadMagic(_))));
        assert!(matches!(decode(b"GHA"), Err(Error::Truncated { .. })));
    }
}
