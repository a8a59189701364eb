//! Synthetic portraits and makeup components.
//!
//! Faces are rendered by mapping every covered pixel back onto the mean
//! face, so the landmarks, parsing mask and pixels always agree. Useful for
//! demos, smoke tests and anything that needs ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{BenchManifest, ReferenceEntry, SourceEntry, Vocabulary};
use crate::geom::{build_warp, canonical_landmarks, canonical_topology, LandmarkSet};
use crate::imgcore::{lab_to_srgb, ColorSpace, ImageBuf};
use crate::layers::{compose_standard_makeup, MakeupCategory, MakeupComponent, MakeupLayer};
use crate::verifier::FaceRegionMask;

const FACE_CENTER: [f64; 2] = [0.5, 0.52];
const FACE_AXES: [f64; 2] = [0.34, 0.42];
/// Luminance swing of the radial skin shading.
const SHADE: f64 = 1.5;

/// Parameters of one synthetic person.
#[derive(Debug, Clone, PartialEq)]
pub struct Identity {
    pub id: String,
    /// Skin color as CIELAB.
    pub skin_lab: [f64; 3],
    pub scale: f64,
    pub offset: [f64; 2],
    /// Head rotation about the vertical axis, degrees.
    pub yaw_deg: f64,
    /// Two sRGB colors of the striped background.
    pub background: [[f32; 3]; 2],
}

impl Identity {
    /// The mean face itself, used as the standard face.
    pub fn standard() -> Self {
        Self {
            id: "standard".into(),
            skin_lab: [70.0, 12.0, 16.0],
            scale: 1.0,
            offset: [0.0, 0.0],
            yaw_deg: 0.0,
            background: [[0.5, 0.5, 0.5]; 2],
        }
    }

    pub fn landmarks(&self) -> LandmarkSet {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        let [cx, cy] = FACE_CENTER;
        canonical_landmarks().map_points(|[x, y, z]| {
            let dx = x - cx;
            let dy = y - cy;
            let rx = dx * c + z * s;
            let rz = -dx * s + z * c;
            [
                cx + self.offset[0] + self.scale * rx,
                cy + self.offset[1] + self.scale * dy,
                self.scale * rz,
            ]
        })
    }
}

/// `n` distinct identities with varied skin tone, pose and background.
pub fn identities(n: usize, seed: u64) -> Vec<Identity> {
    const TONES: [[f64; 3]; 4] = [[74.0, 10.0, 15.0], [62.0, 14.0, 20.0], [50.0, 15.0, 22.0], [40.0, 13.0, 20.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = TONES[i % TONES.len()];
            let bg = |rng: &mut ChaCha8Rng| [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()];
            Identity {
                id: format!("id{i:03}"),
                skin_lab: [
                    t[0] + rng.random_range(-3.0..3.0),
                    t[1] + rng.random_range(-2.0..2.0),
                    t[2] + rng.random_range(-2.0..2.0),
                ],
                scale: rng.random_range(0.86..1.04),
                offset: [rng.random_range(-0.04..0.04), rng.random_range(-0.03..0.03)],
                yaw_deg: rng.random_range(-15.0..15.0),
                background: [bg(&mut rng), bg(&mut rng)],
            }
        })
        .collect()
}

/// One rendered portrait with ground-truth landmarks and parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    pub id: String,
    pub image: ImageBuf,
    pub landmarks: LandmarkSet,
    pub mask: FaceRegionMask,
}

pub fn render_portrait(identity: &Identity, size: usize) -> Portrait {
    let lms = identity.landmarks();
    let topo = canonical_topology();
    let field = build_warp(&canonical_landmarks(), &lms, topo, true).expect("canonical topology");
    let owner = field.coverage(size, size);
    let mut img = ImageBuf::zeros(size, size, 3, ColorSpace::Srgb);
    for (i, t) in owner.iter().enumerate() {
        let (x, y) = (i % size, i / size);
        let px = img.px_mut(i);
        match t {
            Some(t) => {
                let p = [(x as f64 + 0.5) / size as f64, (y as f64 + 0.5) / size as f64];
                let [u, v] = field.map(*t as usize, p);
                let r2 = ((u - FACE_CENTER[0]) / FACE_AXES[0]).powi(2) + ((v - FACE_CENTER[1]) / FACE_AXES[1]).powi(2);
                let [l, a, b] = identity.skin_lab;
                let rgb = lab_to_srgb([l + SHADE * (0.5 - r2), a, b]);
                for k in 0..3 {
                    px[k] = rgb[k].clamp(0.0, 1.0) as f32;
                }
            }
            None => px.copy_from_slice(&identity.background[(x / 6) % 2]),
        }
    }
    let mask = FaceRegionMask::from_fn(size, size, |i| owner[i].is_some());
    Portrait {
        id: identity.id.clone(),
        image: img,
        landmarks: lms,
        mask,
    }
}

/// The bare standard face.
pub fn standard_face(size: usize) -> Portrait {
    render_portrait(&Identity::standard(), size)
}

type Shape = Box<dyn Fn(f64, f64) -> bool>;

fn ellipse(c: [f64; 2], r: [f64; 2]) -> Shape {
    Box::new(move |u, v| ((u - c[0]) / r[0]).powi(2) + ((v - c[1]) / r[1]).powi(2) <= 1.0)
}

fn pair(c: [f64; 2], r: [f64; 2]) -> Shape {
    let a = ellipse(c, r);
    let b = ellipse([1.0 - c[0], c[1]], r);
    Box::new(move |u, v| a(u, v) || b(u, v))
}

fn rect(x: [f64; 2], y: [f64; 2]) -> Shape {
    Box::new(move |u, v| (x[0]..=x[1]).contains(&u) && (y[0]..=y[1]).contains(&v))
}

fn mirrored_rect(x: [f64; 2], y: [f64; 2]) -> Shape {
    let a = rect(x, y);
    let b = rect([1.0 - x[1], 1.0 - x[0]], y);
    Box::new(move |u, v| a(u, v) || b(u, v))
}

/// Hard-edged RGBA sprite in the standard-face frame.
pub fn sprite(size: usize, shape: &dyn Fn(f64, f64) -> bool, color: [f32; 3], alpha: f32) -> ImageBuf {
    let mut s = ImageBuf::zeros(size, size, 4, ColorSpace::Srgb);
    for y in 0..size {
        for x in 0..size {
            let (u, v) = ((x as f64 + 0.5) / size as f64, (y as f64 + 0.5) / size as f64);
            if shape(u, v) {
                s.pixel_mut(x, y).copy_from_slice(&[color[0], color[1], color[2], alpha]);
            }
        }
    }
    s
}

/// Three variants per category, differing in shape, placement and color.
pub fn component_library(size: usize) -> Vec<MakeupComponent> {
    use MakeupCategory::*;
    let specs: Vec<(&str, MakeupCategory, Shape, [f32; 3], f32)> = vec![
        ("shadow_blue", Eyeshadows, pair([0.37, 0.42], [0.07, 0.025]), [0.2, 0.35, 0.8], 0.7),
        ("shadow_gold", Eyeshadows, pair([0.35, 0.40], [0.09, 0.035]), [0.85, 0.7, 0.25], 0.7),
        ("shadow_smoky", Eyeshadows, pair([0.38, 0.44], [0.06, 0.02]), [0.25, 0.2, 0.25], 0.8),
        ("liner_black", Eyeliners, mirrored_rect([0.30, 0.44], [0.446, 0.456]), [0.05, 0.05, 0.08], 1.0),
        ("liner_brown", Eyeliners, mirrored_rect([0.31, 0.43], [0.452, 0.466]), [0.30, 0.18, 0.10], 1.0),
        ("liner_green", Eyeliners, mirrored_rect([0.28, 0.45], [0.440, 0.452]), [0.10, 0.45, 0.25], 1.0),
        ("lash_short", Eyelashes, mirrored_rect([0.32, 0.42], [0.392, 0.402]), [0.02, 0.02, 0.02], 1.0),
        ("lash_long", Eyelashes, mirrored_rect([0.29, 0.45], [0.385, 0.400]), [0.05, 0.03, 0.03], 1.0),
        ("lash_navy", Eyelashes, mirrored_rect([0.30, 0.43], [0.395, 0.405]), [0.05, 0.05, 0.30], 1.0),
        ("brow_brown", Eyebrows, mirrored_rect([0.29, 0.44], [0.340, 0.357]), [0.30, 0.20, 0.12], 0.9),
        ("brow_black", Eyebrows, mirrored_rect([0.31, 0.43], [0.330, 0.345]), [0.08, 0.06, 0.06], 0.9),
        ("brow_auburn", Eyebrows, mirrored_rect([0.28, 0.45], [0.335, 0.360]), [0.50, 0.20, 0.10], 0.85),
        ("blush_pink", Blushes, pair([0.30, 0.60], [0.07, 0.07]), [0.95, 0.50, 0.60], 0.6),
        ("blush_peach", Blushes, pair([0.27, 0.55], [0.09, 0.05]), [0.98, 0.60, 0.45], 0.55),
        ("blush_rose", Blushes, pair([0.34, 0.67], [0.05, 0.05]), [0.85, 0.30, 0.40], 0.6),
        ("lip_red", Lipsticks, ellipse([0.5, 0.76], [0.11, 0.035]), [0.78, 0.08, 0.18], 0.95),
        ("lip_plum", Lipsticks, ellipse([0.5, 0.78], [0.08, 0.030]), [0.45, 0.10, 0.35], 0.9),
        ("lip_coral", Lipsticks, ellipse([0.5, 0.74], [0.13, 0.025]), [0.95, 0.45, 0.35], 0.85),
        ("pattern_stripe", FacialPatterns, rect([0.38, 0.62], [0.24, 0.275]), [0.85, 0.05, 0.10], 1.0),
        ("pattern_heart", FacialPatterns, ellipse([0.73, 0.74], [0.03, 0.03]), [0.60, 0.10, 0.55], 1.0),
        ("pattern_stars", FacialPatterns, pair([0.22, 0.48], [0.02, 0.02]), [0.15, 0.30, 0.90], 1.0),
    ];
    let lms = canonical_landmarks();
    specs
        .into_iter()
        .map(|(name, cat, shape, color, alpha)| {
            MakeupComponent::in_standard_frame(name, cat, sprite(size, &*shape, color, alpha), &lms)
                .expect("valid synthetic component")
        })
        .collect()
}

/// A randomly composed layer on the `size × size` standard face; returns
/// the made-up standard face with it.
pub fn random_layer(size: usize, seed: u64) -> (ImageBuf, MakeupLayer) {
    let std = standard_face(size);
    compose_standard_makeup(
        &component_library(size),
        &std.image,
        &std.landmarks,
        canonical_topology(),
        seed,
    )
    .expect("synthetic library composes")
}

/// Manifest with 50 sources per skin-tone and gender group (35 frontal, 15
/// profile) over three tones, and 176 light, 164 heavy and 172 complex
/// references. Paths are placeholders.
pub fn bench_manifest() -> BenchManifest {
    let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let vocabulary = Vocabulary {
        skin_tones: strs(&["light", "medium", "dark"]),
        genders: strs(&["female", "male"]),
        poses: strs(&["frontal", "profile"]),
        styles: strs(&["light", "heavy", "complex"]),
        complex_styles: strs(&["complex"]),
    };
    let mut sources = Vec::new();
    for tone in &vocabulary.skin_tones {
        for gender in &vocabulary.genders {
            for k in 0..50 {
                sources.push(SourceEntry {
                    path: format!("sources/{tone}_{gender}_{k:02}.png"),
                    skin_tone: tone.clone(),
                    gender: gender.clone(),
                    pose: if k < 35 { "frontal" } else { "profile" }.into(),
                });
            }
        }
    }
    let mut references = Vec::new();
    for (style, n) in [("light", 176), ("heavy", 164), ("complex", 172)] {
        for k in 0..n {
            references.push(ReferenceEntry {
                path: format!("references/{style}_{k:03}.png"),
                style: style.into(),
            });
        }
    }
    BenchManifest {
        vocabulary,
        sources,
        references,
    }
}
