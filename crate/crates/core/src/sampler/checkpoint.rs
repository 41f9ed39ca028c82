//! Portable chain snapshots.
//!
//! Layout (little-endian): magic `NIBGCKPT`, format version `u32`, 32-byte config hash,
//! grid (`steps: u64`, `left: f64`, `right: f64`), `n: u64`, the `n * (steps + 1)` line
//! values, RNG state (32-byte seed, `stream: u64`, `word_pos: u128`), `sweeps_done: u64`,
//! per-line rejection counters, endpoint adaptation state, and a trailing 32-byte SHA-256
//! of everything before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::kernel::{ChainState, EndpointState, GibbsSampler, LineStats};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NIBGCKPT";
pub const FORMAT_VERSION: u32 = 1;

pub fn checkpoint(kernel: &GibbsSampler, state: &ChainState) -> Vec<u8> {
    let config = kernel.config();
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    w.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.extend_from_slice(&config.hash());
    w.extend_from_slice(&(config.grid.steps as u64).to_le_bytes());
    w.extend_from_slice(&config.grid.left.to_le_bytes());
    w.extend_from_slice(&config.grid.right.to_le_bytes());
    w.extend_from_slice(&(state.lines.len() as u64).to_le_bytes());
    for line in &state.lines {
        for x in line {
            w.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.extend_from_slice(&state.rng.get_seed());
    w.extend_from_slice(&state.rng.get_stream().to_le_bytes());
    w.extend_from_slice(&state.rng.get_word_pos().to_le_bytes());
    w.extend_from_slice(&state.sweeps_done.to_le_bytes());
    for s in &state.stats {
        for v in [s.blocks, s.proposals, s.accepted, s.halvings, s.exact] {
            w.extend_from_slice(&v.to_le_bytes());
        }
    }
    let ep = &state.endpoints;
    w.push(ep.adapting as u8);
    for i in 0..state.lines.len() {
        for side in 0..2 {
            w.extend_from_slice(&ep.log_scale[i][side].to_le_bytes());
            w.extend_from_slice(&ep.proposed[i][side].to_le_bytes());
            w.extend_from_slice(&ep.accepted[i][side].to_le_bytes());
        }
    }
    let digest = Sha256::digest(&w);
    w.extend_from_slice(&digest);
    w
}

/// Rebuilds a chain state; the blob must come from a chain with the same configuration.
pub fn restore(kernel: &GibbsSampler, blob: &[u8]) -> Result<ChainState> {
    if blob.len() < MAGIC.len() + 4 + 32 {
        return Err(decode("blob is too short"));
    }
    let (body, digest) = blob.split_at(blob.len() - 32);
    if &blob[..8] != MAGIC {
        return Err(decode("not a chain checkpoint"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(decode(format!(
            "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(decode("checksum mismatch (truncated or corrupted blob)"));
    }
    let config = kernel.config();
    if r.take(32)? != config.hash() {
        return Err(decode("checkpoint was written for a different configuration"));
    }
    let steps = r.u64()? as usize;
    let left = r.f64()?;
    let right = r.f64()?;
    if steps != config.grid.steps || left != config.grid.left || right != config.grid.right {
        return Err(decode("grid does not match the configuration"));
    }
    let n = r.u64()? as usize;
    if n != config.n {
        return Err(decode(format!("expected {} lines, found {n}", config.n)));
    }
    let mut lines = Vec::with_capacity(n);
    for _ in 0..n {
        let mut line = Vec::with_capacity(steps + 1);
        for _ in 0..=steps {
            line.push(r.f64()?);
        }
        lines.push(line);
    }
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = r.u128()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let sweeps_done = r.u64()?;
    let mut stats = Vec::with_capacity(n);
    for _ in 0..n {
        stats.push(LineStats {
            blocks: r.u64()?,
            proposals: r.u64()?,
            accepted: r.u64()?,
            halvings: r.u64()?,
            exact: r.u64()?,
        });
    }
    let adapting = match r.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(decode(format!("bad adaptation flag {b}"))),
    };
    let mut endpoints = EndpointState {
        log_scale: vec![[0.0; 2]; n],
        proposed: vec![[0; 2]; n],
        accepted: vec![[0; 2]; n],
        adapting,
    };
    for i in 0..n {
        for side in 0..2 {
            endpoints.log_scale[i][side] = r.f64()?;
            endpoints.proposed[i][side] = r.u64()?;
            endpoints.accepted[i][side] = r.u64()?;
        }
    }
    if r.pos != body.len() {
        return Err(decode("trailing bytes after chain state"));
    }
    let state = ChainState {
        lines,
        rng,
        sweeps_done,
        stats,
        endpoints,
    };
    if !kernel.is_admissible(&state) {
        return Err(decode("restored lines are not admissible"));
    }
    Ok(state)
}

fn decode(msg: impl Into<String>) -> Error {
    Error::Decode(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.buf.len() {
            return Err(decode("unexpected end of checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
