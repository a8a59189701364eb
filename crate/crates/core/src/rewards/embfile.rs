//! Raw embedding files: `"EMB1" | u32 dim | dim × f32`, little-endian.

use std::io::{Read, Write};

use super::{Embedding, RewardError};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

pub fn write_embedding<W: Write>(e: &Embedding, mut w: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 + 4 * e.dim());
    buf.extend_from_slice(EMB1_MAGIC);
    buf.extend_from_slice(&(e.dim() as u32).to_le_bytes());
    for v in &e.vector {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_embedding<R: Read>(mut r: R, model_tag: impl Into<String>) -> Result<Embedding, RewardError> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)
        .map_err(|_| RewardError::BadFile("truncated header".into()))?;
    if &head[..4] != EMB1_MAGIC {
        return Err(RewardError::BadFile("bad magic".into()));
    }
    let dim = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != dim * 4 {
        return Err(RewardError::BadFile(format!("expected {} payload bytes, found {}", dim * 4, body.len())));
    }
    let vector = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Embedding::new(vector, model_tag)
}
