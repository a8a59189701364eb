//! Makeup-exclusive layers: strip the background, align the face to a fixed
//! template, estimate the skin tone and turn per-pixel deviation from it
//! into opacity.
//!
//! Opacity is `1 − exp(−(λh·ΔH + λc·ΔC + λl·ΔL))` with ΔH the circular hue
//! distance over 180°, and ΔC, ΔL absolute chroma and luminance deviations
//! over 100. Makeup ends up opaque, bare skin transparent.

mod mask;

pub use mask::{FaceRegionMask, LabelMapFile};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{build_warp, canonical_landmarks, warp_image_to, GeomError, LandmarkSet, MeshTopology};
use crate::imgcore::{color_convert, gaussian_blur, save_png, BitDepth, ColorSpace, HclColor, ImageBuf, ImageError};

/// Minimum number of skin pixels needed for a baseline.
pub const MIN_SKIN_PIXELS: usize = 50;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("empty face region")]
    EmptyFaceRegion,
    #[error("insufficient skin sample: {found} pixels, need {needed}")]
    InsufficientSkin { found: usize, needed: usize },
    #[error("empty skin mask")]
    EmptyMask,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid opacity parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpacityParams {
    pub lambda_h: f64,
    pub lambda_c: f64,
    pub lambda_l: f64,
    /// Blur radius for the smoothness test, pixels in the template frame.
    pub sigma_blur: f64,
    /// High-frequency energy (ΔE) below which a pixel counts as smooth.
    pub tau_smooth: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl Default for OpacityParams {
    fn default() -> Self {
        Self {
            lambda_h: 4.0,
            lambda_c: 4.0,
            lambda_l: 4.0,
            sigma_blur: 4.0,
            tau_smooth: 4.0,
            q_lo: 0.10,
            q_hi: 0.90,
        }
    }
}

impl OpacityParams {
    pub fn validate(&self) -> Result<(), VerifierError> {
        let l = [self.lambda_h, self.lambda_c, self.lambda_l];
        if l.iter().any(|v| !v.is_finite() || *v < 0.0) || l.iter().all(|v| *v == 0.0) {
            return Err(VerifierError::InvalidParams(
                "weights must be finite, nonnegative and not all zero".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.q_lo) || !(0.0..=1.0).contains(&self.q_hi) || self.q_lo >= self.q_hi {
            return Err(VerifierError::InvalidParams("need 0 <= q_lo < q_hi <= 1".into()));
        }
        if !(self.sigma_blur >= 0.0) || !(self.tau_smooth > 0.0) {
            return Err(VerifierError::InvalidParams("sigma_blur >= 0 and tau_smooth > 0 required".into()));
        }
        Ok(())
    }

    /// Opacity for normalized deviations, each in `[0, 1]`.
    pub fn opacity(&self, dh: f64, dc: f64, dl: f64) -> f64 {
        let s = self.lambda_h * dh + self.lambda_c * dc + self.lambda_l * dl;
        1.0 - (-s).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinBaseline {
    pub h_bar: f64,
    pub c_bar: f64,
    pub l_bar: f64,
    pub pixel_count: usize,
}

/// Fixed alignment frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub landmarks: LandmarkSet,
    pub width: usize,
    pub height: usize,
}

impl Default for Template {
    /// Mean face at 512×512.
    fn default() -> Self {
        Self::canonical(512)
    }
}

impl Template {
    pub fn canonical(size: usize) -> Self {
        Self {
            landmarks: canonical_landmarks(),
            width: size,
            height: size,
        }
    }
}

/// Template-frame RGBA: aligned sRGB face colors, alpha = makeup opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct MakeupExclusiveLayer {
    pub rgba: ImageBuf,
    pub baseline: SkinBaseline,
    pub params: OpacityParams,
}

#[derive(Serialize)]
struct LayerMeta<'a> {
    width: usize,
    height: usize,
    baseline: &'a SkinBaseline,
    params: &'a OpacityParams,
}

impl MakeupExclusiveLayer {
    pub fn alpha(&self) -> ImageBuf {
        self.rgba.channel(3, ColorSpace::Alpha)
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&LayerMeta {
            width: self.rgba.width(),
            height: self.rgba.height(),
            baseline: &self.baseline,
            params: &self.params,
        })
        .expect("serializable")
    }

    /// Writes `png` (16-bit RGBA) and `meta` (baseline and parameters).
    pub fn save(&self, png: impl AsRef<Path>, meta: impl AsRef<Path>) -> Result<(), VerifierError> {
        save_png(&self.rgba, png, BitDepth::Sixteen)?;
        std::fs::write(meta, self.metadata_json())?;
        Ok(())
    }
}

/// RGBA copy of `img` whose alpha is 1 on facial labels and 0 elsewhere.
pub fn face_region(img: &ImageBuf, mask: &FaceRegionMask) -> Result<ImageBuf, VerifierError> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(VerifierError::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    if mask.face_pixel_count() == 0 {
        return Err(VerifierError::EmptyFaceRegion);
    }
    let alpha = ImageBuf::new(
        img.width(),
        img.height(),
        1,
        ColorSpace::Alpha,
        (0..img.len_pixels()).map(|i| if mask.is_face(i) { 1.0 } else { 0.0 }).collect(),
    )?;
    Ok(img.color_only().with_alpha(&alpha)?)
}

/// Warps a face onto the template frame with back-face culling. Color is
/// resampled premultiplied, so transparent pixels never leak into the
/// result.
pub fn align_to_template(
    face: &ImageBuf,
    lms: &LandmarkSet,
    template: &Template,
    topo: &MeshTopology,
) -> Result<ImageBuf, VerifierError> {
    if face.channels() != 4 {
        return Err(VerifierError::Image(ImageError::BadChannels(face.channels())));
    }
    let field = build_warp(lms, &template.landmarks, topo, true)?;
    let warped = warp_image_to(&face.premultiplied(), &field, template.width, template.height);
    Ok(warped.unpremultiplied())
}

/// Linearly interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * f
}

/// Binary mask of smooth skin pixels. A pixel survives if it is opaque,
/// its CIELAB distance to the blurred image is below `tau_smooth`, and its
/// chroma and luminance lie within the `[q_lo, q_hi]` quantiles of the
/// smooth set.
pub fn select_skin_pixels(aligned: &ImageBuf, params: &OpacityParams) -> Result<ImageBuf, VerifierError> {
    params.validate()?;
    let lab = color_convert(&aligned.color_only(), ColorSpace::Cielab)?;
    let blurred = gaussian_blur(&lab, params.sigma_blur);
    let n = aligned.len_pixels();
    let mut cand = Vec::new();
    for i in 0..n {
        if aligned.alpha_at(i) <= 0.5 {
            continue;
        }
        let (p, b) = (lab.px(i), blurred.px(i));
        let e: f64 = (0..3).map(|k| (p[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt();
        if e < params.tau_smooth {
            cand.push(i);
        }
    }
    let hcl: Vec<HclColor> = cand
        .iter()
        .map(|&i| {
            let p = lab.px(i);
            HclColor::from_lab([p[0] as f64, p[1] as f64, p[2] as f64])
        })
        .collect();
    let mut mask = ImageBuf::zeros(aligned.width(), aligned.height(), 1, ColorSpace::Alpha);
    let mut found = 0;
    if !cand.is_empty() {
        let mut cs: Vec<f64> = hcl.iter().map(|h| h.c).collect();
        let mut ls: Vec<f64> = hcl.iter().map(|h| h.l).collect();
        cs.sort_by(f64::total_cmp);
        ls.sort_by(f64::total_cmp);
        let (c_lo, c_hi) = (quantile(&cs, params.q_lo), quantile(&cs, params.q_hi));
        let (l_lo, l_hi) = (quantile(&ls, params.q_lo), quantile(&ls, params.q_hi));
        for (&i, h) in cand.iter().zip(&hcl) {
            if (c_lo..=c_hi).contains(&h.c) && (l_lo..=l_hi).contains(&h.l) {
                mask.data_mut()[i] = 1.0;
                found += 1;
            }
        }
    }
    if found < MIN_SKIN_PIXELS {
        return Err(VerifierError::InsufficientSkin {
            found,
            needed: MIN_SKIN_PIXELS,
        });
    }
    Ok(mask)
}

/// Circular-mean hue and mean chroma / luminance over `skin_mask > 0`.
pub fn skin_baseline(aligned: &ImageBuf, skin_mask: &ImageBuf) -> Result<SkinBaseline, VerifierError> {
    if !aligned.same_dims(skin_mask) || skin_mask.channels() != 1 {
        return Err(VerifierError::DimensionMismatch("skin mask must match the aligned face".into()));
    }
    let lab = color_convert(&aligned.color_only(), ColorSpace::Cielab)?;
    let (mut s, mut c, mut cc, mut l) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0usize;
    for (i, m) in skin_mask.data().iter().enumerate() {
        if *m <= 0.0 {
            continue;
        }
        let p = lab.px(i);
        let h = HclColor::from_lab([p[0] as f64, p[1] as f64, p[2] as f64]);
        let r = h.h.to_radians();
        s += r.sin();
        c += r.cos();
        cc += h.c;
        l += h.l;
        count += 1;
    }
    if count == 0 {
        return Err(VerifierError::EmptyMask);
    }
    let mut h_bar = s.atan2(c).to_degrees().rem_euclid(360.0);
    if h_bar >= 360.0 {
        h_bar = 0.0;
    }
    Ok(SkinBaseline {
        h_bar,
        c_bar: cc / count as f64,
        l_bar: l / count as f64,
        pixel_count: count,
    })
}

const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Per-pixel opacity against the skin baseline; zero where the input is
/// transparent. Values stay strictly below 1.
pub fn opacity_map(aligned: &ImageBuf, baseline: &SkinBaseline, params: &OpacityParams) -> Result<ImageBuf, VerifierError> {
    let lab = color_convert(&aligned.color_only(), ColorSpace::Cielab)?;
    let mut out = ImageBuf::zeros(aligned.width(), aligned.height(), 1, ColorSpace::Alpha);
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        if aligned.alpha_at(i) <= 0.0 {
            continue;
        }
        let p = lab.px(i);
        let h = HclColor::from_lab([p[0] as f64, p[1] as f64, p[2] as f64]);
        let dh = HclColor::hue_distance(h.h, baseline.h_bar) / 180.0;
        let dc = (h.c - baseline.c_bar).abs() / 100.0;
        let dl = (h.l - baseline.l_bar).abs() / 100.0;
        *o = (params.opacity(dh, dc, dl) as f32).min(BELOW_ONE);
    }
    Ok(out)
}

/// Full verifier pipeline for one portrait.
pub fn makeup_exclusive_layer(
    img: &ImageBuf,
    mask: &FaceRegionMask,
    lms: &LandmarkSet,
    template: &Template,
    topo: &MeshTopology,
    params: &OpacityParams,
) -> Result<MakeupExclusiveLayer, VerifierError> {
    params.validate()?;
    let face = face_region(img, mask)?;
    let aligned = align_to_template(&face, lms, template, topo)?;
    let skin = select_skin_pixels(&aligned, params)?;
    let baseline = skin_baseline(&aligned, &skin)?;
    let opacity = opacity_map(&aligned, &baseline, params)?;
    let mut rgba = aligned;
    for (i, p) in rgba.data_mut().chunks_exact_mut(4).enumerate() {
        p[3] *= opacity.data()[i];
    }
    Ok(MakeupExclusiveLayer {
        rgba,
        baseline,
        params: *params,
    })
}
