//! Makeup-layer curation: compose components on the standard face, extract
//! the residual layer, re-target it to portraits and pair the results into
//! supervision triplets.
//!
//! A [`MakeupLayer`] stores a straight CIELAB residual and a coverage alpha
//! on standard-face geometry. Compositing adds `alpha * residual` to the
//! target in CIELAB, so the product is the color change observed on the
//! standard face.

mod file;
mod library;
mod triplets;

pub use file::{read_layer, write_layer, MKUP_MAGIC, MKUP_VERSION};
pub use library::{load_component, load_component_library, ComponentSidecar};
pub use triplets::{build_triplets, read_triplets, write_triplets, AppliedRecord, TripletRecord};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{build_warp, delaunay_triangulate, warp_image_to, GeomError, LandmarkSet, MeshTopology};
use crate::imgcore::{color_convert, composite_residual, ColorSpace, ImageBuf, ImageError};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("anchor landmark {index} absent from topology with {count} landmarks")]
    AnchorOutOfRange { index: usize, count: usize },
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error("unknown makeup category '{0}'")]
    UnknownCategory(String),
    #[error("bad layer file: {0}")]
    BadFile(String),
    #[error("identity '{identity}' appears twice with layer '{layer}'")]
    DuplicateApplication { identity: String, layer: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MakeupCategory {
    Eyebrows,
    Eyeliners,
    Eyelashes,
    Eyeshadows,
    Blushes,
    Lipsticks,
    FacialPatterns,
}

impl MakeupCategory {
    pub const ALL: [MakeupCategory; 7] = [
        MakeupCategory::Eyebrows,
        MakeupCategory::Eyeliners,
        MakeupCategory::Eyelashes,
        MakeupCategory::Eyeshadows,
        MakeupCategory::Blushes,
        MakeupCategory::Lipsticks,
        MakeupCategory::FacialPatterns,
    ];

    /// Compositing order, bottom first.
    pub const PAINT_ORDER: [MakeupCategory; 7] = [
        MakeupCategory::Eyeshadows,
        MakeupCategory::Eyeliners,
        MakeupCategory::Eyelashes,
        MakeupCategory::Eyebrows,
        MakeupCategory::Blushes,
        MakeupCategory::Lipsticks,
        MakeupCategory::FacialPatterns,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MakeupCategory::Eyebrows => "eyebrows",
            MakeupCategory::Eyeliners => "eyeliners",
            MakeupCategory::Eyelashes => "eyelashes",
            MakeupCategory::Eyeshadows => "eyeshadows",
            MakeupCategory::Blushes => "blushes",
            MakeupCategory::Lipsticks => "lipsticks",
            MakeupCategory::FacialPatterns => "facial_patterns",
        }
    }

    fn paint_rank(self) -> usize {
        Self::PAINT_ORDER.iter().position(|&c| c == self).unwrap()
    }
}

impl fmt::Display for MakeupCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MakeupCategory {
    type Err = LayerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| LayerError::UnknownCategory(s.to_string()))
    }
}

/// One library element: an RGBA sRGB sprite plus the landmarks that place it.
///
/// `anchor_landmarks.points[k]` is the position, in the sprite's own
/// normalized frame, of standard-face landmark `anchor_indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MakeupComponent {
    pub name: String,
    pub category: MakeupCategory,
    pub rgba: ImageBuf,
    pub anchor_indices: Vec<usize>,
    pub anchor_landmarks: LandmarkSet,
}

impl MakeupComponent {
    pub fn new(
        name: impl Into<String>,
        category: MakeupCategory,
        rgba: ImageBuf,
        anchor_indices: Vec<usize>,
        anchor_landmarks: LandmarkSet,
    ) -> Result<Self, LayerError> {
        if rgba.channels() != 4 || rgba.space() != ColorSpace::Srgb {
            return Err(LayerError::InvalidComponent("sprite must be RGBA sRGB".into()));
        }
        if rgba.pixels().any(|p| !(0.0..=1.0).contains(&p[3])) {
            return Err(LayerError::InvalidComponent("alpha outside [0, 1]".into()));
        }
        if anchor_indices.len() != anchor_landmarks.len() {
            return Err(LayerError::InvalidComponent(format!(
                "{} anchor indices but {} anchor points",
                anchor_indices.len(),
                anchor_landmarks.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            category,
            rgba,
            anchor_indices,
            anchor_landmarks,
        })
    }

    /// Component drawn directly in the standard-face frame, anchored on
    /// every standard landmark.
    pub fn in_standard_frame(
        name: impl Into<String>,
        category: MakeupCategory,
        rgba: ImageBuf,
        std_landmarks: &LandmarkSet,
    ) -> Result<Self, LayerError> {
        let indices = (0..std_landmarks.len()).collect();
        Self::new(name, category, rgba, indices, std_landmarks.clone())
    }
}

/// Straight CIELAB residual and coverage on the standard face.
#[derive(Debug, Clone, PartialEq)]
pub struct MakeupLayer {
    pub residual: ImageBuf,
    pub alpha: ImageBuf,
    pub std_landmarks: LandmarkSet,
    pub layer_id: String,
}

impl MakeupLayer {
    pub fn new(
        residual: ImageBuf,
        alpha: ImageBuf,
        std_landmarks: LandmarkSet,
        layer_id: impl Into<String>,
    ) -> Result<Self, LayerError> {
        if !residual.same_dims(&alpha) || residual.channels() != 3 || alpha.channels() != 1 {
            return Err(LayerError::DimensionMismatch(
                "residual must be 3-channel and alpha 1-channel of equal size".into(),
            ));
        }
        if alpha.data().iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(LayerError::BadFile("alpha outside [0, 1]".into()));
        }
        Ok(Self {
            residual: residual.retag(ColorSpace::Cielab),
            alpha: alpha.retag(ColorSpace::Alpha),
            std_landmarks,
            layer_id: layer_id.into(),
        })
    }

    pub fn empty(width: usize, height: usize, std_landmarks: LandmarkSet, layer_id: impl Into<String>) -> Self {
        Self {
            residual: ImageBuf::zeros(width, height, 3, ColorSpace::Cielab),
            alpha: ImageBuf::zeros(width, height, 1, ColorSpace::Alpha),
            std_landmarks,
            layer_id: layer_id.into(),
        }
    }

    pub fn width(&self) -> usize {
        self.alpha.width()
    }

    pub fn height(&self) -> usize {
        self.alpha.height()
    }

    /// `alpha * residual`, i.e. the color change the layer applies.
    pub fn premultiplied_residual(&self) -> ImageBuf {
        let mut out = self.residual.clone();
        for (i, p) in out.data_mut().chunks_exact_mut(3).enumerate() {
            let a = self.alpha.data()[i];
            p.iter_mut().for_each(|v| *v *= a);
        }
        out
    }

    /// Straight layer from the change `delta` and coverage `alpha`.
    fn from_premultiplied(
        delta: &ImageBuf,
        alpha: ImageBuf,
        std_landmarks: LandmarkSet,
        layer_id: String,
    ) -> Self {
        let mut residual = ImageBuf::zeros(delta.width(), delta.height(), 3, ColorSpace::Cielab);
        for i in 0..delta.len_pixels() {
            let a = alpha.data()[i];
            if a > 0.0 {
                let d = delta.px(i);
                let r = residual.px_mut(i);
                for k in 0..3 {
                    r[k] = d[k] / a;
                }
            }
        }
        Self {
            residual,
            alpha: alpha.retag(ColorSpace::Alpha),
            std_landmarks,
            layer_id,
        }
    }
}

/// Alpha-over of `top` (straight RGBA) onto `base` (RGB[A], sRGB), in place.
fn alpha_over(base: &mut ImageBuf, top: &ImageBuf) {
    let c = base.channels();
    for (i, p) in base.data_mut().chunks_exact_mut(c).enumerate() {
        let t = top.px(i);
        let a = t[3];
        if a <= 0.0 {
            continue;
        }
        for k in 0..3 {
            p[k] = t[k] * a + p[k] * (1.0 - a);
        }
    }
}

/// Places one component on the standard face: a piecewise-affine warp over
/// the topology triangles spanned by its anchors (or, when the anchors span
/// none, over their own Delaunay mesh). Returns straight RGBA in the
/// standard frame.
pub fn place_component(
    component: &MakeupComponent,
    std_landmarks: &LandmarkSet,
    topo: &MeshTopology,
    width: usize,
    height: usize,
) -> Result<ImageBuf, LayerError> {
    for &index in &component.anchor_indices {
        if index >= topo.landmark_count || index >= std_landmarks.len() {
            return Err(LayerError::AnchorOutOfRange {
                index,
                count: topo.landmark_count,
            });
        }
    }
    let local: BTreeMap<usize, usize> = component
        .anchor_indices
        .iter()
        .enumerate()
        .map(|(k, &g)| (g, k))
        .collect();
    let mut tris: Vec<[usize; 3]> = topo
        .triangles
        .iter()
        .filter_map(|t| {
            Some([*local.get(&t[0])?, *local.get(&t[1])?, *local.get(&t[2])?])
        })
        .collect();
    let dst_points: Vec<[f64; 3]> = component
        .anchor_indices
        .iter()
        .map(|&g| std_landmarks.points[g])
        .collect();
    if tris.is_empty() {
        let xy: Vec<[f64; 2]> = dst_points.iter().map(|p| [p[0], p[1]]).collect();
        tris = delaunay_triangulate(&xy)?.triangles;
    }
    let sub = MeshTopology::new(dst_points.len(), tris)?;
    let id = format!("{}#anchors", std_landmarks.topology_id);
    let src = LandmarkSet {
        topology_id: id.clone(),
        points: component.anchor_landmarks.points.clone(),
    };
    let dst = LandmarkSet {
        topology_id: id,
        points: dst_points,
    };
    let field = build_warp(&src, &dst, &sub, false)?;
    let warped = warp_image_to(&component.rgba.premultiplied(), &field, width, height);
    Ok(warped.unpremultiplied())
}

/// At most one component per category, chosen with a seeded generator,
/// returned in painting order.
pub fn select_components(components: &[MakeupComponent], seed: u64) -> Vec<&MakeupComponent> {
    let mut by_cat: BTreeMap<usize, Vec<&MakeupComponent>> = BTreeMap::new();
    for c in components {
        by_cat.entry(c.category.paint_rank()).or_default().push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_cat
        .into_values()
        .map(|cands| cands[rng.random_range(0..cands.len())])
        .collect()
}

/// Composes the given components (already one per category) in painting
/// order onto the standard face.
pub fn compose_selected(
    selected: &[&MakeupComponent],
    std_img: &ImageBuf,
    std_landmarks: &LandmarkSet,
    topo: &MeshTopology,
    layer_id: impl Into<String>,
) -> Result<(ImageBuf, MakeupLayer), LayerError> {
    if std_img.space() != ColorSpace::Srgb || std_img.channels() < 3 {
        return Err(LayerError::Image(ImageError::WrongSpace {
            expected: ColorSpace::Srgb,
            got: std_img.space(),
        }));
    }
    topo.check(std_landmarks)?;
    let (w, h) = (std_img.width(), std_img.height());
    let mut ordered: Vec<&MakeupComponent> = selected.to_vec();
    ordered.sort_by_key(|c| c.category.paint_rank());

    let mut made = std_img.clone();
    let mut union = ImageBuf::zeros(w, h, 1, ColorSpace::Alpha);
    for comp in ordered {
        let placed = place_component(comp, std_landmarks, topo, w, h)?;
        alpha_over(&mut made, &placed);
        for (u, p) in union.data_mut().iter_mut().zip(placed.pixels()) {
            *u = u.max(p[3]);
        }
    }

    let lab_made = color_convert(&made.color_only(), ColorSpace::Cielab)?;
    let lab_std = color_convert(&std_img.color_only(), ColorSpace::Cielab)?;
    let mut delta = ImageBuf::zeros(w, h, 3, ColorSpace::Cielab);
    for i in 0..w * h {
        if union.data()[i] > 0.0 {
            let (m, s) = (lab_made.px(i), lab_std.px(i));
            let d = delta.px_mut(i);
            for k in 0..3 {
                d[k] = m[k] - s[k];
            }
        }
    }
    let layer = MakeupLayer::from_premultiplied(&delta, union, std_landmarks.clone(), layer_id.into());
    Ok((made, layer))
}

/// Random one-per-category combination of `components` composed onto the
/// standard face. Returns the made-up face and its layer.
pub fn compose_standard_makeup(
    components: &[MakeupComponent],
    std_img: &ImageBuf,
    std_landmarks: &LandmarkSet,
    topo: &MeshTopology,
    seed: u64,
) -> Result<(ImageBuf, MakeupLayer), LayerError> {
    let selected = select_components(components, seed);
    let names: BTreeSet<&str> = selected.iter().map(|c| c.name.as_str()).collect();
    let layer_id = if names.is_empty() {
        format!("bare-{seed}")
    } else {
        format!("{}-{seed}", names.into_iter().collect::<Vec<_>>().join("+"))
    };
    compose_selected(&selected, std_img, std_landmarks, topo, layer_id)
}

/// ΔE below which a pixel is treated as untouched.
pub const ALPHA_DELTA_E_LO: f64 = 1.0;
/// ΔE at and above which a pixel is fully covered.
pub const ALPHA_DELTA_E_HI: f64 = 6.0;

fn delta_e_alpha(de: f64) -> f32 {
    let s = ((de - ALPHA_DELTA_E_LO) / (ALPHA_DELTA_E_HI - ALPHA_DELTA_E_LO)).clamp(0.0, 1.0);
    (s * s * (3.0 - 2.0 * s)) as f32
}

/// Layer from a made-up / bare pair of the standard face. Coverage ramps
/// smoothly from 0 at ΔE = 1 to 1 at ΔE = 6.
pub fn extract_layer(
    make_img: &ImageBuf,
    non_img: &ImageBuf,
    std_landmarks: &LandmarkSet,
) -> Result<MakeupLayer, LayerError> {
    if !make_img.same_dims(non_img) {
        return Err(LayerError::DimensionMismatch(format!(
            "make {}x{} vs non {}x{}",
            make_img.width(),
            make_img.height(),
            non_img.width(),
            non_img.height()
        )));
    }
    let lab_m = color_convert(&make_img.color_only(), ColorSpace::Cielab)?;
    let lab_n = color_convert(&non_img.color_only(), ColorSpace::Cielab)?;
    let (w, h) = (make_img.width(), make_img.height());
    let mut delta = ImageBuf::zeros(w, h, 3, ColorSpace::Cielab);
    let mut alpha = ImageBuf::zeros(w, h, 1, ColorSpace::Alpha);
    for i in 0..w * h {
        let (m, n) = (lab_m.px(i), lab_n.px(i));
        let d = [
            m[0] as f64 - n[0] as f64,
            m[1] as f64 - n[1] as f64,
            m[2] as f64 - n[2] as f64,
        ];
        let a = delta_e_alpha((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
        if a > 0.0 {
            alpha.data_mut()[i] = a;
            let dp = delta.px_mut(i);
            for k in 0..3 {
                dp[k] = d[k] as f32;
            }
        }
    }
    Ok(MakeupLayer::from_premultiplied(
        &delta,
        alpha,
        std_landmarks.clone(),
        "extracted".to_string(),
    ))
}

/// Warps a layer onto a `width × height` portrait with landmarks
/// `tgt_landmarks`. Returns the straight residual and coverage there.
pub fn warp_layer(
    layer: &MakeupLayer,
    tgt_landmarks: &LandmarkSet,
    topo: &MeshTopology,
    width: usize,
    height: usize,
) -> Result<(ImageBuf, ImageBuf), LayerError> {
    let field = build_warp(&layer.std_landmarks, tgt_landmarks, topo, true)?;
    let (w, h) = (width, height);
    let delta = warp_image_to(&layer.premultiplied_residual(), &field, w, h);
    let alpha = warp_image_to(&layer.alpha, &field, w, h);

    let mut residual = ImageBuf::zeros(w, h, 3, ColorSpace::Cielab);
    for i in 0..w * h {
        let a = alpha.data()[i];
        if a > 0.0 {
            let d = delta.px(i);
            let r = residual.px_mut(i);
            for k in 0..3 {
                r[k] = d[k] / a;
            }
        }
    }
    Ok((residual, alpha))
}

/// Re-targets `layer` onto a portrait. Pixels outside the warped coverage
/// are copied from `tgt_img` bit for bit.
pub fn apply_layer(
    layer: &MakeupLayer,
    tgt_img: &ImageBuf,
    tgt_landmarks: &LandmarkSet,
    topo: &MeshTopology,
) -> Result<ImageBuf, LayerError> {
    let (w, h) = (tgt_img.width(), tgt_img.height());
    let (residual, alpha) = warp_layer(layer, tgt_landmarks, topo, w, h)?;
    let base = color_convert(tgt_img, ColorSpace::Cielab)?;
    let mut out = composite_residual(&base, &residual, &alpha)?;
    let c = tgt_img.channels();
    for i in 0..w * h {
        if alpha.data()[i] <= 0.0 {
            out.px_mut(i).copy_from_slice(tgt_img.px(i));
        }
    }
    debug_assert_eq!(out.channels(), c);
    Ok(out)
}
