//! Client for the model sidecar.
//!
//! Every POST carries `{"kind", "model_tag", "image"}` with the image as a
//! base64 PNG. Routes:
//!
//! | route           | response                                   |
//! |-----------------|--------------------------------------------|
//! | `/v1/embed`     | `{"vector": [f32], "dim", "model_tag"}`    |
//! | `/v1/parse`     | `{"mask": base64 PNG, "label_map": {..}}`  |
//! | `/v1/landmarks` | landmark JSON                              |
//! | `/v1/aesthetic` | `{"score": f32}`                           |
//! | `GET /v1/health`| `{"ok": bool, "stub": bool}`               |
//!
//! 4xx answers fail at once; transport errors and 5xx are retried.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EmbedKind, EmbedRequest, Embedding, EmbeddingProvider, RewardError};
use crate::geom::LandmarkSet;
use crate::imgcore::{decode_label_png, encode_png, BitDepth, ImageBuf};
use crate::verifier::{FaceRegionMask, LabelMapFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    EmbedImage,
    EmbedFace,
    Parse,
    Landmarks,
    Aesthetic,
}

impl From<EmbedKind> for ProviderKind {
    fn from(k: EmbedKind) -> Self {
        match k {
            EmbedKind::Image => ProviderKind::EmbedImage,
            EmbedKind::Face => ProviderKind::EmbedFace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub kind: ProviderKind,
    pub model_tag: String,
    pub image: String,
}

impl ProviderRequest {
    pub fn new(kind: ProviderKind, model_tag: &str, image: &ImageBuf) -> Result<Self, RewardError> {
        Ok(Self {
            kind,
            model_tag: model_tag.to_string(),
            image: B64.encode(encode_png(image, BitDepth::Eight)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub ok: bool,
    pub stub: bool,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f32>,
    dim: usize,
    #[serde(default)]
    model_tag: Option<String>,
}

#[derive(Deserialize)]
struct ParseResponse {
    mask: String,
    label_map: LabelMapFile,
}

#[derive(Deserialize)]
struct AestheticResponse {
    score: f64,
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    base_url: String,
    agent: ureq::Agent,
    attempts: usize,
    backoff: Duration,
}

impl HttpProvider {
    /// `attempts` counts the first try; it is raised to at least 1.
    pub fn new(base_url: impl Into<String>, timeout: Duration, attempts: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            attempts: attempts.max(1),
            backoff: Duration::from_millis(50),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn call<T: DeserializeOwned>(&self, route: &str, body: Option<&ProviderRequest>) -> Result<T, RewardError> {
        let url = format!("{}{route}", self.base_url);
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * attempt as u32);
            }
            let res = match body {
                Some(b) => self.agent.post(&url).send_json(b),
                None => self.agent.get(&url).call(),
            };
            let mut resp = match res {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            if status >= 500 {
                last = format!("status {status}: {}", resp.body_mut().read_to_string().unwrap_or_default());
                continue;
            }
            if status >= 400 {
                return Err(RewardError::Provider {
                    status,
                    message: resp.body_mut().read_to_string().unwrap_or_default(),
                });
            }
            return resp.body_mut().read_json::<T>().map_err(|e| RewardError::Provider {
                status,
                message: format!("malformed response: {e}"),
            });
        }
        Err(RewardError::Unavailable {
            attempts: self.attempts,
            message: last,
        })
    }

    pub fn health(&self) -> Result<Health, RewardError> {
        self.call("/v1/health", None)
    }

    pub fn parse(&self, image: &ImageBuf, model_tag: &str) -> Result<FaceRegionMask, RewardError> {
        let req = ProviderRequest::new(ProviderKind::Parse, model_tag, image)?;
        let resp: ParseResponse = self.call("/v1/parse", Some(&req))?;
        let bytes = B64
            .decode(resp.mask.as_bytes())
            .map_err(|e| RewardError::Provider { status: 200, message: format!("mask is not base64: {e}") })?;
        let (w, h, labels) = decode_label_png(&bytes)?;
        Ok(FaceRegionMask::new(w, h, labels, resp.label_map.face_label_set)?)
    }

    pub fn landmarks(&self, image: &ImageBuf, model_tag: &str) -> Result<LandmarkSet, RewardError> {
        let req = ProviderRequest::new(ProviderKind::Landmarks, model_tag, image)?;
        let lms: LandmarkSet = self.call("/v1/landmarks", Some(&req))?;
        lms.validate().map_err(|e| RewardError::Provider {
            status: 200,
            message: e.to_string(),
        })?;
        Ok(lms)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, req: &EmbedRequest<'_>) -> Result<Embedding, RewardError> {
        let body = ProviderRequest::new(req.kind.into(), req.model_tag, req.image)?;
        let resp: EmbedResponse = self.call("/v1/embed", Some(&body))?;
        if resp.dim != resp.vector.len() {
            return Err(RewardError::InvalidEmbedding(format!(
                "declared dim {} but {} components",
                resp.dim,
                resp.vector.len()
            )));
        }
        Embedding::new(resp.vector, resp.model_tag.unwrap_or_else(|| req.model_tag.to_string()))
    }

    fn aesthetic(&self, image: &ImageBuf) -> Result<f64, RewardError> {
        let body = ProviderRequest::new(ProviderKind::Aesthetic, "aesthetic", image)?;
        let resp: AestheticResponse = self.call("/v1/aesthetic", Some(&body))?;
        Ok(resp.score)
    }
}
