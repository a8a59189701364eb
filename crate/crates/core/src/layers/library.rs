//! Component library on disk: `name.png` (RGBA) next to `name.json`.
//!
//! ```json
//! {"category": "lipsticks", "anchors": [12, 13, 40], "anchor_points": [[x, y, z], ...]}
//! ```
//!
//! `anchor_points` is optional; without it the sprite is taken to be drawn
//! in the standard-face frame and the anchors sit at the standard landmarks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerError, MakeupCategory, MakeupComponent};
use crate::geom::LandmarkSet;
use crate::imgcore::{load_png, ColorSpace, ImageBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSidecar {
    pub category: MakeupCategory,
    #[serde(default)]
    pub anchors: Option<Vec<usize>>,
    #[serde(default)]
    pub anchor_points: Option<Vec<[f64; 3]>>,
}

fn ensure_rgba(img: ImageBuf) -> ImageBuf {
    if img.channels() == 4 {
        return img;
    }
    let ones = ImageBuf::filled(img.width(), img.height(), ColorSpace::Alpha, &[1.0]);
    img.with_alpha(&ones).expect("same dims")
}

pub fn load_component(
    png: impl AsRef<Path>,
    sidecar: &ComponentSidecar,
    std_landmarks: &LandmarkSet,
) -> Result<MakeupComponent, LayerError> {
    let png = png.as_ref();
    let name = png
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rgba = ensure_rgba(load_png(png)?);
    let anchors: Vec<usize> = sidecar
        .anchors
        .clone()
        .unwrap_or_else(|| (0..std_landmarks.len()).collect());
    for &a in &anchors {
        if a >= std_landmarks.len() {
            return Err(LayerError::AnchorOutOfRange {
                index: a,
                count: std_landmarks.len(),
            });
        }
    }
    let points = match &sidecar.anchor_points {
        Some(p) => p.clone(),
        None => anchors.iter().map(|&a| std_landmarks.points[a]).collect(),
    };
    let anchor_landmarks = LandmarkSet::new(format!("{name}#anchors"), points)?;
    MakeupComponent::new(name, sidecar.category, rgba, anchors, anchor_landmarks)
}

/// Every `*.png` with a `*.json` sidecar in `dir`, sorted by name.
pub fn load_component_library(
    dir: impl AsRef<Path>,
    std_landmarks: &LandmarkSet,
) -> Result<Vec<MakeupComponent>, LayerError> {
    let mut pngs: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .filter(|p| p.with_extension("json").exists())
        .collect();
    pngs.sort();
    pngs.iter()
        .map(|png| {
            let sidecar: ComponentSidecar =
                serde_json::from_str(&std::fs::read_to_string(png.with_extension("json"))?)?;
            load_component(png, &sidecar, std_landmarks)
        })
        .collect()
}
