use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{read_embedding, Embedding, RewardError};
use crate::imgcore::{color_convert, ColorSpace, ImageBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedKind {
    /// Whole-image encoder (makeup layers, reference similarity).
    Image,
    /// Face-recognition encoder.
    Face,
}

#[derive(Debug, Clone, Copy)]
pub struct EmbedRequest<'a> {
    pub kind: EmbedKind,
    pub model_tag: &'a str,
    pub image: &'a ImageBuf,
    /// Where the image came from, for providers that look embeddings up.
    pub key: Option<&'a Path>,
}

impl<'a> EmbedRequest<'a> {
    pub fn new(kind: EmbedKind, model_tag: &'a str, image: &'a ImageBuf) -> Self {
        Self {
            kind,
            model_tag,
            image,
            key: None,
        }
    }

    pub fn with_key(mut self, key: &'a Path) -> Self {
        self.key = Some(key);
        self
    }
}

/// Source of embeddings and aesthetic scores. Implementations must be
/// callable from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, req: &EmbedRequest<'_>) -> Result<Embedding, RewardError>;

    /// Aesthetic score of a generated image.
    fn aesthetic(&self, image: &ImageBuf) -> Result<f64, RewardError>;
}

const GRID: usize = 16;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Offline stand-in for real encoders.
///
/// The image is box-averaged onto a 16×16 grid of premultiplied RGBA cells
/// and multiplied by a Gaussian random matrix seeded from the kind and model
/// tag. Similar images get similar vectors, equal pixels get equal vectors,
/// and the dimension depends only on the embedder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubEmbedder {
    pub dim: usize,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self { dim: 256 }
    }
}

impl StubEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn features(image: &ImageBuf) -> Result<Vec<f64>, RewardError> {
        let img = match image.space() {
            ColorSpace::Srgb => image.clone(),
            ColorSpace::Alpha => {
                let g = image.data().iter().flat_map(|&v| [v, v, v]).collect();
                ImageBuf::new(image.width(), image.height(), 3, ColorSpace::Srgb, g)?
            }
            _ => color_convert(image, ColorSpace::Srgb)?,
        };
        let (w, h) = (img.width(), img.height());
        let mut sums = vec![0.0f64; GRID * GRID * 4];
        let mut counts = vec![0usize; GRID * GRID];
        for y in 0..h {
            let gy = y * GRID / h.max(1);
            for x in 0..w {
                let gx = x * GRID / w.max(1);
                let cell = gy * GRID + gx;
                let i = y * w + x;
                let a = img.alpha_at(i) as f64;
                let p = img.px(i);
                for k in 0..3 {
                    sums[cell * 4 + k] += a * p[k] as f64;
                }
                sums[cell * 4 + 3] += a;
                counts[cell] += 1;
            }
        }
        for (cell, n) in counts.iter().enumerate() {
            if *n > 0 {
                for k in 0..4 {
                    sums[cell * 4 + k] /= *n as f64;
                }
            }
        }
        Ok(sums)
    }

    fn projection_seed(kind: EmbedKind, model_tag: &str) -> u64 {
        let kind = match kind {
            EmbedKind::Image => "image",
            EmbedKind::Face => "face",
        };
        fnv1a(format!("{kind}/{model_tag}").as_bytes())
    }
}

impl EmbeddingProvider for StubEmbedder {
    fn embed(&self, req: &EmbedRequest<'_>) -> Result<Embedding, RewardError> {
        let f = Self::features(req.image)?;
        let mut rng = ChaCha8Rng::seed_from_u64(Self::projection_seed(req.kind, req.model_tag));
        let mut out = vec![0.0f64; self.dim];
        for o in out.iter_mut() {
            for x in &f {
                let g: f64 = StandardNormal.sample(&mut rng);
                *o += g * x;
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        Embedding::new(out.into_iter().map(|v| v as f32).collect(), req.model_tag)
    }

    /// Mean premultiplied brightness, in `[0, 1]`.
    fn aesthetic(&self, image: &ImageBuf) -> Result<f64, RewardError> {
        let f = Self::features(image)?;
        let n = (GRID * GRID * 3) as f64;
        Ok(f.chunks_exact(4).map(|c| c[0] + c[1] + c[2]).sum::<f64>() / n)
    }
}

/// Precomputed embeddings on disk: request key `dir/x.png` with model tag
/// `m` reads `root/x.m.emb`.
#[derive(Debug, Clone)]
pub struct OfflineProvider {
    pub root: PathBuf,
    /// Score returned by `aesthetic`; offline mode has no aesthetic model.
    pub aesthetic_score: f64,
}

impl OfflineProvider {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            aesthetic_score: 0.0,
        }
    }

    pub fn path_for(&self, key: &Path, model_tag: &str) -> PathBuf {
        let stem = key.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.root.join(format!("{stem}.{model_tag}.emb"))
    }
}

impl EmbeddingProvider for OfflineProvider {
    fn embed(&self, req: &EmbedRequest<'_>) -> Result<Embedding, RewardError> {
        let key = req
            .key
            .ok_or_else(|| RewardError::BadFile("offline embeddings need a request key".into()))?;
        let path = self.path_for(key, req.model_tag);
        let f = std::fs::File::open(&path)
            .map_err(|e| RewardError::BadFile(format!("{}: {e}", path.display())))?;
        read_embedding(std::io::BufReader::new(f), req.model_tag)
    }

    fn aesthetic(&self, _image: &ImageBuf) -> Result<f64, RewardError> {
        Ok(self.aesthetic_score)
    }
}
