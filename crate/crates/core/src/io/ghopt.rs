//! GHOPT optimizer-state sidecar (little-endian):
//! `"GHOPT1\0\0"`, u64 iteration, f32 gamma, f32×2 length clamp,
//! f32×5 base rates, f32×5 current rates (rotation, length, opacity, sh,
//! position), u64 accumulated steps, u32 strand count, then per strand
//! u32 segment count, f32 gradient accumulator, f32×segments initial
//! lengths.

use std::path::Path;

use super::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::optim::{LearningRates, OptimState};

pub const MAGIC: &[u8; 8] = b"GHOPT1\0\0";

fn rates(w: &mut ByteWriter, lr: &LearningRates) {
    for v in [lr.rotation, lr.length, lr.opacity, lr.sh, lr.position] {
        w.f32(v);
    }
}

fn read_rates(r: &mut ByteReader<'_>) -> Result<LearningRates> {
    Ok(LearningRates {
        rotation: r.f32()? as f64,
        length: r.f32()? as f64,
        opacity: r.f32()? as f64,
        sh: r.f32()? as f64,
        position: r.f32()? as f64,
    })
}

pub fn encode(state: &OptimState) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u64(state.iteration);
    w.f32(state.gamma);
    w.f32(state.length_clamp[0]);
    w.f32(state.length_clamp[1]);
    rates(&mut w, &state.base_lr);
    rates(&mut w, &state.lr);
    w.u64(state.accum_steps);
    w.u32(state.initial_length.len() as u32);
    for (i, lens) in state.initial_length.iter().enumerate() {
        w.u32(lens.len() as u32);
        w.f32(state.grad_accum.get(i).copied().unwrap_or(0.0));
        lens.iter().for_each(|l| w.f32(*l));
    }
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<OptimState> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        if magic.starts_with(b"GHOPT") {
            return Err(Error::VersionMismatch {
                found: String::from_utf8_lossy(magic).trim_end_matches('\0').to_string(),
                expected: "GHOPT1".into(),
            });
        }
        return Err(Error::BadMagic(magic.to_vec()));
    }
    let iteration = r.u64()?;
    let gamma = r.f32()? as f64;
    let length_clamp = [r.f32()? as f64, r.f32()? as f64];
    let base_lr = read_rates(&mut r)?;
    let lr = read_rates(&mut r)?;
    let accum_steps = r.u64()?;
    let n = r.u32()? as usize;
    let mut initial_length = Vec::new();
    let mut grad_accum = Vec::new();
    for _ in 0..n {
        let m = r.u32()? as usize;
        grad_accum.push(r.f32()? as f64);
        if m.saturating_mul(4) > r.remaining() {
            return Err(Error::Truncated {
                offset: r.offset(),
                needed: m.saturating_mul(4),
                available: r.remaining(),
            });
        }
        initial_length.push((0..m).map(|_| r.f32().map(|v| v as f64)).collect::<Result<Vec<_>>>()?);
    }
    r.finish()?;
    Ok(OptimState {
        base_lr,
        lr,
        gamma,
        length_clamp,
        iteration,
        initial_length,
        grad_accum,
        accum_steps,
    })
}

pub fn write(state: &OptimState, path: &Path) -> Result<()> {
    std::fs::write(path, encode(state))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<OptimState> {
    decode(&super::read_bytes(path)?)
}
