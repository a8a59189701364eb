use std::path::{Path, PathBuf};
use std::time::Duration;

use beautykit::rewards::{
    EmbeddingProvider, HttpProvider, OfflineProvider, StubEmbedder, DEFAULT_FACE_MODEL, DEFAULT_IMAGE_MODEL,
    DEFAULT_LAYER_MODEL,
};
use beautykit::verifier::OpacityParams;
use serde::Deserialize;

use crate::error::CliError;
use crate::GlobalArgs;

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub provider: Option<String>,
    pub stub_provider: Option<bool>,
    pub embeddings: Option<PathBuf>,
    pub timeout_secs: Option<u64>,
    pub attempts: Option<usize>,
    pub template_size: Option<usize>,
    pub image_model: Option<String>,
    pub face_model: Option<String>,
    pub layer_model: Option<String>,
    pub opacity: Option<OpacityParams>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderMode {
    Stub,
    Http(String),
    Offline(PathBuf),
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub provider: Option<ProviderMode>,
    pub timeout: Duration,
    pub attempts: usize,
    pub template_size: usize,
    pub image_model: String,
    pub face_model: String,
    pub layer_model: String,
    pub opacity: OpacityParams,
}

fn one_mode(stub: bool, url: Option<String>, dir: Option<PathBuf>) -> Result<Option<ProviderMode>, CliError> {
    let mut modes = Vec::new();
    if stub {
        modes.push(ProviderMode::Stub);
    }
    if let Some(u) = url {
        modes.push(ProviderMode::Http(u));
    }
    if let Some(d) = dir {
        modes.push(ProviderMode::Offline(d));
    }
    match modes.len() {
        0 => Ok(None),
        1 => Ok(modes.pop()),
        _ => Err(CliError::usage("select exactly one provider mode")),
    }
}

impl RunConfig {
    pub fn resolve(flags: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flag_mode = one_mode(flags.stub_provider, flags.provider.clone(), flags.embeddings.clone())?;
        let provider = match flag_mode {
            Some(m) => Some(m),
            None => one_mode(file.stub_provider.unwrap_or(false), file.provider, file.embeddings)?,
        };
        let opacity = file.opacity.unwrap_or_default();
        opacity
            .validate()
            .map_err(|e| CliError::usage(format!("opacity parameters: {e}")))?;
        let jobs = flags.jobs.or(file.jobs);
        if jobs == Some(0) {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        Ok(Self {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs,
            provider,
            timeout: Duration::from_secs(file.timeout_secs.unwrap_or(30)),
            attempts: file.attempts.unwrap_or(3).max(1),
            template_size: flags.template_size.or(file.template_size).unwrap_or(512),
            image_model: file.image_model.unwrap_or_else(|| DEFAULT_IMAGE_MODEL.into()),
            face_model: file.face_model.unwrap_or_else(|| DEFAULT_FACE_MODEL.into()),
            layer_model: file.layer_model.unwrap_or_else(|| DEFAULT_LAYER_MODEL.into()),
            opacity,
        })
    }

    pub fn embedding_provider(&self) -> Result<Box<dyn EmbeddingProvider>, CliError> {
        match &self.provider {
            None => Err(CliError::usage(
                "this command needs a provider: --stub-provider, --provider URL or --embeddings DIR",
            )),
            Some(ProviderMode::Stub) => Ok(Box::new(StubEmbedder::default())),
            Some(ProviderMode::Http(url)) => Ok(Box::new(HttpProvider::new(url.clone(), self.timeout, self.attempts))),
            Some(ProviderMode::Offline(dir)) => Ok(Box::new(OfflineProvider::new(dir.clone()))),
        }
    }
}
