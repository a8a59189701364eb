//! Benchmark harness: manifests, seeded pairing, metrics and reports.

mod report;

pub use report::{
    evaluate_run, scatter_svg, EvalRow, MethodReport, MetricMeans, RowStatus, RunItem, RunManifest,
    RunModels,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ImageBuf, ImageError};
use crate::rewards::RewardError;
use crate::verifier::{FaceRegionMask, VerifierError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("manifest has no {0}")]
    EmptySide(&'static str),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no non-facial pixels")]
    NoBackground,
    #[error("counts must be nonnegative with a positive total")]
    EmptyCounts,
    #[error("no methods to normalize")]
    NoMethods,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub path: String,
    pub skin_tone: String,
    pub gender: String,
    pub pose: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub path: String,
    pub style: String,
}

/// Label vocabularies a manifest declares up front.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub skin_tones: Vec<String>,
    pub genders: Vec<String>,
    pub poses: Vec<String>,
    pub styles: Vec<String>,
    /// Styles counted as complex in the statistics.
    #[serde(default = "default_complex")]
    pub complex_styles: Vec<String>,
}

fn default_complex() -> Vec<String> {
    vec!["complex".into()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub vocabulary: Vocabulary,
    pub sources: Vec<SourceEntry>,
    pub references: Vec<ReferenceEntry>,
}

impl BenchManifest {
    pub fn validate(&self) -> Result<(), BenchError> {
        let v = &self.vocabulary;
        let check = |what: &str, label: &str, vocab: &[String]| {
            if vocab.iter().any(|x| x == label) {
                Ok(())
            } else {
                Err(BenchError::InvalidManifest(format!("{what} label '{label}' not declared")))
            }
        };
        for s in &self.sources {
            check("skin tone", &s.skin_tone, &v.skin_tones)?;
            check("gender", &s.gender, &v.genders)?;
            check("pose", &s.pose, &v.poses)?;
        }
        for r in &self.references {
            check("style", &r.style, &v.styles)?;
        }
        for c in &v.complex_styles {
            check("complex style", c, &v.styles)?;
        }
        let mut seen = BTreeSet::new();
        for p in self.sources.iter().map(|s| &s.path).chain(self.references.iter().map(|r| &r.path)) {
            if !seen.insert(p) {
                return Err(BenchError::InvalidManifest(format!("duplicate path '{p}'")));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Indices into a manifest's sources and references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub source: usize,
    pub reference: usize,
}

/// `n` source/reference pairs drawn uniformly with replacement.
pub fn make_pairs(manifest: &BenchManifest, n: usize, seed: u64) -> Result<Vec<Pair>, BenchError> {
    if manifest.sources.is_empty() {
        return Err(BenchError::EmptySide("sources"));
    }
    if manifest.references.is_empty() {
        return Err(BenchError::EmptySide("references"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| Pair {
            source: rng.random_range(0..manifest.sources.len()),
            reference: rng.random_range(0..manifest.references.len()),
        })
        .collect())
}

/// Mean Euclidean sRGB distance over non-facial pixels.
pub fn l2m(gen: &ImageBuf, src: &ImageBuf, mask: &FaceRegionMask) -> Result<f64, BenchError> {
    if !gen.same_dims(src) || gen.width() != mask.width() || gen.height() != mask.height() {
        return Err(BenchError::DimensionMismatch(format!(
            "gen {}x{}, src {}x{}, mask {}x{}",
            gen.width(),
            gen.height(),
            src.width(),
            src.height(),
            mask.width(),
            mask.height()
        )));
    }
    if gen.channels() < 3 || src.channels() < 3 {
        return Err(BenchError::DimensionMismatch("color images required".into()));
    }
    let (mut sum, mut n) = (0.0f64, 0usize);
    for i in 0..gen.len_pixels() {
        if mask.is_face(i) {
            continue;
        }
        let (a, b) = (gen.px(i), src.px(i));
        sum += (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(BenchError::NoBackground);
    }
    Ok(sum / n as f64)
}

/// Joint score: reference similarity times identity similarity.
pub fn cxf(clip_i: f64, face_sim: f64) -> f64 {
    clip_i * face_sim
}

/// Maps scores onto `[0, 1]` across methods; all-equal input maps to 0.
pub fn minmax_normalize(scores: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, BenchError> {
    if scores.is_empty() {
        return Err(BenchError::NoMethods);
    }
    let lo = scores.values().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scores
        .iter()
        .map(|(k, v)| {
            let x = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            (k.clone(), x)
        })
        .collect())
}

/// Shannon entropy of a categorical distribution, in bits.
pub fn entropy_bits(counts: &[f64]) -> Result<f64, BenchError> {
    let total: f64 = counts.iter().sum();
    if counts.iter().any(|c| !(*c >= 0.0)) || !(total > 0.0) {
        return Err(BenchError::EmptyCounts);
    }
    Ok(counts
        .iter()
        .filter(|c| **c > 0.0)
        .map(|c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Composition of a benchmark manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub sources: usize,
    pub references: usize,
    pub skin_tone_counts: BTreeMap<String, usize>,
    pub skin_tone_entropy_bits: f64,
    /// Fraction of sources per gender label.
    pub gender_share: BTreeMap<String, f64>,
    pub pose_share: BTreeMap<String, f64>,
    /// Fraction of references per style label.
    pub style_share: BTreeMap<String, f64>,
    pub complex_share: f64,
}

fn tally<'a>(vocab: &[String], labels: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut m: BTreeMap<String, usize> = vocab.iter().map(|v| (v.clone(), 0)).collect();
    for l in labels {
        *m.entry(l.clone()).or_default() += 1;
    }
    m
}

fn shares(counts: &BTreeMap<String, usize>, total: usize) -> BTreeMap<String, f64> {
    counts
        .iter()
        .map(|(k, v)| (k.clone(), if total > 0 { *v as f64 / total as f64 } else { 0.0 }))
        .collect()
}

impl ManifestStats {
    pub fn of(m: &BenchManifest) -> Result<Self, BenchError> {
        m.validate()?;
        if m.sources.is_empty() {
            return Err(BenchError::EmptySide("sources"));
        }
        if m.references.is_empty() {
            return Err(BenchError::EmptySide("references"));
        }
        let v = &m.vocabulary;
        let tones = tally(&v.skin_tones, m.sources.iter().map(|s| &s.skin_tone));
        let genders = tally(&v.genders, m.sources.iter().map(|s| &s.gender));
        let poses = tally(&v.poses, m.sources.iter().map(|s| &s.pose));
        let styles = tally(&v.styles, m.references.iter().map(|r| &r.style));
        let complex = m
            .references
            .iter()
            .filter(|r| v.complex_styles.contains(&r.style))
            .count();
        let tone_counts: Vec<f64> = tones.values().map(|c| *c as f64).collect();
        Ok(Self {
            sources: m.sources.len(),
            references: m.references.len(),
            skin_tone_entropy_bits: entropy_bits(&tone_counts)?,
            skin_tone_counts: tones,
            gender_share: shares(&genders, m.sources.len()),
            pose_share: shares(&poses, m.sources.len()),
            style_share: shares(&styles, m.references.len()),
            complex_share: complex as f64 / m.references.len() as f64,
        })
    }
}

#[cfg(test)]
mod tests;
