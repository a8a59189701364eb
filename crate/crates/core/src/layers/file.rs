//! `.mkup` layer files.
//!
//! ```text
//! "MKUP" | u32 version = 1 | u32 width | u32 height
//! width * height * (f32 dL, f32 da, f32 db, f32 alpha)
//! u32 json_len | json_len bytes of landmark JSON
//! ```
//!
//! All integers and floats are little-endian. The layer id is not stored;
//! readers take it from the file stem.

use std::io::{Read, Write};
use std::path::Path;

use super::{LayerError, MakeupLayer};
use crate::geom::LandmarkSet;
use crate::imgcore::{ColorSpace, ImageBuf};

pub const MKUP_MAGIC: &[u8; 4] = b"MKUP";
pub const MKUP_VERSION: u32 = 1;

pub fn write_layer<W: Write>(layer: &MakeupLayer, mut w: W) -> Result<(), LayerError> {
    let (width, height) = (layer.width(), layer.height());
    let mut buf = Vec::with_capacity(16 + width * height * 16);
    buf.extend_from_slice(MKUP_MAGIC);
    buf.extend_from_slice(&MKUP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    buf.extend_from_slice(&(height as u32).to_le_bytes());
    for i in 0..width * height {
        for v in layer.residual.px(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&layer.alpha.data()[i].to_le_bytes());
    }
    let json = layer.std_landmarks.to_json();
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(json.as_bytes());
    w.write_all(&buf)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], LayerError> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| LayerError::BadFile("truncated".into()))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

fn u32_at(bytes: &[u8], pos: &mut usize) -> Result<u32, LayerError> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()))
}

pub fn read_layer<R: Read>(mut r: R, layer_id: impl Into<String>) -> Result<MakeupLayer, LayerError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    if take(&bytes, &mut pos, 4)? != MKUP_MAGIC {
        return Err(LayerError::BadFile("bad magic".into()));
    }
    let version = u32_at(&bytes, &mut pos)?;
    if version != MKUP_VERSION {
        return Err(LayerError::BadFile(format!("unsupported version {version}")));
    }
    let width = u32_at(&bytes, &mut pos)? as usize;
    let height = u32_at(&bytes, &mut pos)? as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| LayerError::BadFile("size overflow".into()))?;
    let body = take(&bytes, &mut pos, n.checked_mul(16).ok_or_else(|| LayerError::BadFile("size overflow".into()))?)?;
    let mut residual = Vec::with_capacity(n * 3);
    let mut alpha = Vec::with_capacity(n);
    for px in body.chunks_exact(16) {
        let f = |k: usize| f32::from_le_bytes(px[k * 4..k * 4 + 4].try_into().unwrap());
        residual.extend_from_slice(&[f(0), f(1), f(2)]);
        alpha.push(f(3));
    }
    let json_len = u32_at(&bytes, &mut pos)? as usize;
    let json = take(&bytes, &mut pos, json_len)?;
    let json = std::str::from_utf8(json).map_err(|_| LayerError::BadFile("landmark json is not utf-8".into()))?;
    let lms = LandmarkSet::from_json(json)?;
    MakeupLayer::new(
        ImageBuf::new(width, height, 3, ColorSpace::Cielab, residual)?,
        ImageBuf::new(width, height, 1, ColorSpace::Alpha, alpha)?,
        lms,
        layer_id,
    )
}

impl MakeupLayer {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LayerError> {
        let f = std::fs::File::create(path)?;
        write_layer(self, std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LayerError> {
        let path = path.as_ref();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        read_layer(std::fs::File::open(path)?, id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_layer(self, &mut out).expect("in-memory write");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lms() -> LandmarkSet {
        LandmarkSet::new("t", vec![[0.1, 0.2, -0.1], [0.7, 0.3, 0.0], [0.4, 0.9, 0.05]]).unwrap()
    }

    #[test]
    fn header_layout() {
        let layer = MakeupLayer::empty(3, 2, lms(), "x");
        let b = layer.to_bytes();
        assert_eq!(&b[0..4], b"MKUP");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 2);
        let json_len = u32::from_le_bytes(b[16 + 96..16 + 100].try_into().unwrap()) as usize;
        assert_eq!(b.len(), 16 + 96 + 4 + json_len);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_layer(&b"NOPE\x01\0\0\0"[..], "x").is_err());
        let mut b = MakeupLayer::empty(2, 2, lms(), "x").to_bytes();
        b.truncate(b.len() - 3);
        assert!(read_layer(&b[..], "x").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..6, h in 1usize..6, seed in any::<u32>()) {
            let n = w * h;
            let res: Vec<f32> = (0..n * 3).map(|i| ((i as u32).wrapping_mul(seed | 1) % 2000) as f32 / 10.0 - 100.0).collect();
            let alpha: Vec<f32> = (0..n).map(|i| ((i as u32 ^ seed) % 101) as f32 / 100.0).collect();
            let layer = MakeupLayer::new(
                ImageBuf::new(w, h, 3, ColorSpace::Cielab, res).unwrap(),
                ImageBuf::new(w, h, 1, ColorSpace::Alpha, alpha).unwrap(),
                lms(),
                "L",
            ).unwrap();
            let back = read_layer(&layer.to_bytes()[..], "L").unwrap();
            prop_assert_eq!(back, layer);
        }
    }
}
