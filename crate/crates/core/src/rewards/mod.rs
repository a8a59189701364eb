//! Reward aggregation, group-relative advantages and the makeup reward.

mod embfile;
mod http;
mod provider;

pub use embfile::{read_embedding, write_embedding, EMB1_MAGIC};
pub use http::{Health, HttpProvider, ProviderKind, ProviderRequest};
pub use provider::{EmbedKind, EmbedRequest, EmbeddingProvider, OfflineProvider, StubEmbedder};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{canonical_topology, LandmarkSet, MeshTopology};
use crate::imgcore::{ImageBuf, ImageError};
use crate::verifier::{makeup_exclusive_layer, FaceRegionMask, OpacityParams, Template, VerifierError};

pub const DEFAULT_LAYER_MODEL: &str = "layer-encoder";
pub const DEFAULT_IMAGE_MODEL: &str = "image-encoder";
pub const DEFAULT_FACE_MODEL: &str = "face-encoder";

/// Standard deviation below which a group counts as tied.
pub const MIN_GROUP_STD: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("group of {0} is too small; need at least 2")]
    GroupTooSmall(usize),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("provider rejected request ({status}): {message}")]
    Provider { status: u16, message: String },
    #[error("provider unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: usize, message: String },
    #[error("bad embedding file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RewardError {
    /// Whether retrying the same call later may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, RewardError::Unavailable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub model_tag: String,
}

impl Embedding {
    pub fn new(vector: Vec<f32>, model_tag: impl Into<String>) -> Result<Self, RewardError> {
        if vector.is_empty() {
            return Err(RewardError::InvalidEmbedding("empty vector".into()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(RewardError::InvalidEmbedding("non-finite component".into()));
        }
        Ok(Self {
            vector,
            model_tag: model_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn cosine_similarity(u: &Embedding, v: &Embedding) -> Result<f64, RewardError> {
    if u.dim() != v.dim() {
        return Err(RewardError::DimMismatch(u.dim(), v.dim()));
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.vector.iter().zip(&v.vector) {
        let (a, b) = (*a as f64, *b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(RewardError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub r_makeup: f64,
    pub r_face: f64,
    pub r_ir: f64,
    pub weights: [f64; 3],
}

pub const EQUAL_WEIGHTS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

impl RewardVector {
    pub fn new(r_makeup: f64, r_face: f64, r_ir: f64) -> Self {
        Self {
            r_makeup,
            r_face,
            r_ir,
            weights: EQUAL_WEIGHTS,
        }
    }

    pub fn with_weights(mut self, weights: [f64; 3]) -> Self {
        self.weights = weights;
        self
    }
}

/// Weighted sum of the three reward terms.
pub fn aggregate_reward(rv: &RewardVector) -> f64 {
    let [a, b, c] = rv.weights;
    a * rv.r_makeup + b * rv.r_face + c * rv.r_ir
}

/// Rewards of one group of samples drawn for the same prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGroup {
    pub rewards: Vec<f64>,
}

impl RewardGroup {
    pub fn advantages(&self) -> Result<Vec<f64>, RewardError> {
        grpo_advantages(&self.rewards)
    }
}

/// `(r_i − mean) / std` with the population standard deviation. Tied
/// groups get all-zero advantages.
pub fn grpo_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    let g = rewards.len();
    if g < 2 {
        return Err(RewardError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    if !(std >= MIN_GROUP_STD) {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// A portrait with its parsing and landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBundle {
    pub image: ImageBuf,
    pub mask: FaceRegionMask,
    pub landmarks: LandmarkSet,
}

/// Everything the makeup reward needs besides the two bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierSetup {
    pub template: Template,
    pub topology: MeshTopology,
    pub params: OpacityParams,
    pub layer_model: String,
}

impl Default for VerifierSetup {
    fn default() -> Self {
        Self {
            template: Template::default(),
            topology: canonical_topology().clone(),
            params: OpacityParams::default(),
            layer_model: DEFAULT_LAYER_MODEL.into(),
        }
    }
}

impl VerifierSetup {
    pub fn layer_embedding(&self, b: &FaceBundle, embedder: &dyn EmbeddingProvider) -> Result<Embedding, RewardError> {
        let layer = makeup_exclusive_layer(&b.image, &b.mask, &b.landmarks, &self.template, &self.topology, &self.params)?;
        embedder.embed(&EmbedRequest::new(EmbedKind::Image, &self.layer_model, &layer.rgba))
    }
}

/// Cosine similarity of the embeddings of the two makeup-exclusive layers.
pub fn makeup_reward(
    ref_bundle: &FaceBundle,
    gen_bundle: &FaceBundle,
    setup: &VerifierSetup,
    embedder: &dyn EmbeddingProvider,
) -> Result<f64, RewardError> {
    let r = setup.layer_embedding(ref_bundle, embedder)?;
    let g = setup.layer_embedding(gen_bundle, embedder)?;
    cosine_similarity(&r, &g)
}

/// Scores every generated sample against the reference makeup, the source
/// identity and the aesthetic model. Samples are processed in parallel.
pub fn score_group(
    src_image: &ImageBuf,
    ref_bundle: &FaceBundle,
    generated: &[FaceBundle],
    setup: &VerifierSetup,
    provider: &dyn EmbeddingProvider,
    face_model: &str,
) -> Result<Vec<RewardVector>, RewardError> {
    let ref_layer = setup.layer_embedding(ref_bundle, provider)?;
    let src_face = provider.embed(&EmbedRequest::new(EmbedKind::Face, face_model, src_image))?;
    generated
        .par_iter()
        .map(|g| {
            let layer = setup.layer_embedding(g, provider)?;
            let face = provider.embed(&EmbedRequest::new(EmbedKind::Face, face_model, &g.image))?;
            Ok(RewardVector::new(
                cosine_similarity(&ref_layer, &layer)?,
                cosine_similarity(&src_face, &face)?,
                provider.aesthetic(&g.image)?,
            ))
        })
        .collect()
}
