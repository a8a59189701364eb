use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VerifierError;
use crate::imgcore::{load_label_png, save_label_png};

/// Label map JSON next to a parsing PNG.
///
/// ```json
/// {"face_label_set": [1, 2, 3], "names": {"skin": 1, "brow": 2, "lips": 3}}
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapFile {
    pub face_label_set: BTreeSet<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub names: BTreeMap<String, u32>,
}

/// Face-parsing label map plus the label ids that count as face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceRegionMask {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    face_labels: BTreeSet<u32>,
}

impl FaceRegionMask {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        face_labels: BTreeSet<u32>,
    ) -> Result<Self, VerifierError> {
        if labels.len() != width * height {
            return Err(VerifierError::InvalidMask(format!(
                "{} labels for {width}x{height}",
                labels.len()
            )));
        }
        if face_labels.is_empty() {
            return Err(VerifierError::InvalidMask("face label set is empty".into()));
        }
        Ok(Self {
            width,
            height,
            labels,
            face_labels,
        })
    }

    /// Mask with label 1 where `face(i)` holds and 0 elsewhere.
    pub fn from_fn(width: usize, height: usize, face: impl Fn(usize) -> bool) -> Self {
        Self {
            width,
            height,
            labels: (0..width * height).map(|i| face(i) as u32).collect(),
            face_labels: BTreeSet::from([1]),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn face_labels(&self) -> &BTreeSet<u32> {
        &self.face_labels
    }

    #[inline]
    pub fn is_face(&self, i: usize) -> bool {
        self.face_labels.contains(&self.labels[i])
    }

    pub fn face_pixel_count(&self) -> usize {
        (0..self.labels.len()).filter(|&i| self.is_face(i)).count()
    }

    pub fn load(png: impl AsRef<Path>, label_map: impl AsRef<Path>) -> Result<Self, VerifierError> {
        let (w, h, labels) = load_label_png(png)?;
        let map: LabelMapFile = serde_json::from_str(&std::fs::read_to_string(label_map)?)?;
        Self::new(w, h, labels, map.face_label_set)
    }

    pub fn save(&self, png: impl AsRef<Path>, label_map: impl AsRef<Path>) -> Result<(), VerifierError> {
        if self.labels.iter().any(|&l| l > 255) {
            return Err(VerifierError::InvalidMask("label ids above 255 do not fit an 8-bit PNG".into()));
        }
        save_label_png(self.width, self.height, &self.labels, png)?;
        let map = LabelMapFile {
            face_label_set: self.face_labels.clone(),
            names: BTreeMap::new(),
        };
        std::fs::write(label_map, serde_json::to_string_pretty(&map)?)?;
        Ok(())
    }
}
