use super::{ColorSpace, ImageBuf, ImageError};

// linear sRGB -> XYZ, D65, 2° observer.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

/// D65 reference white as the image of linear RGB white under the forward
/// matrix, so that sRGB white lands on `L = 100, a = b = 0`.
pub const WHITE_D65: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[inline]
pub fn srgb_to_linear_component(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb_component(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn mat3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn linear_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let xyz = mat3(&RGB_TO_XYZ, rgb);
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_to_linear(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let yr = if lab[0] > KAPPA * EPSILON {
        fy * fy * fy
    } else {
        lab[0] / KAPPA
    };
    let xyz = [
        lab_f_inv(fx) * WHITE_D65[0],
        yr * WHITE_D65[1],
        lab_f_inv(fz) * WHITE_D65[2],
    ];
    mat3(&XYZ_TO_RGB, xyz)
}

/// sRGB triple in `[0, 1]` to CIELAB.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    linear_to_lab(rgb.map(srgb_to_linear_component))
}

/// CIELAB to sRGB. The result is not clamped.
pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    lab_to_linear(lab).map(linear_to_srgb_component)
}

/// Cylindrical CIELAB (LCh(ab)): hue in degrees, chroma, luminance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HclColor {
    pub h: f64,
    pub c: f64,
    pub l: f64,
}

impl HclColor {
    pub fn from_lab(lab: [f64; 3]) -> Self {
        let c = lab[1].hypot(lab[2]);
        let mut h = lab[2].atan2(lab[1]).to_degrees();
        if h < 0.0 {
            h += 360.0;
        }
        if h >= 360.0 {
            h -= 360.0;
        }
        Self { h, c, l: lab[0] }
    }

    pub fn to_lab(self) -> [f64; 3] {
        let r = self.h.to_radians();
        [self.l, self.c * r.cos(), self.c * r.sin()]
    }

    /// Shortest angular distance between two hues, in degrees `[0, 180]`.
    pub fn hue_distance(h1: f64, h2: f64) -> f64 {
        let d = (h1 - h2).rem_euclid(360.0);
        d.min(360.0 - d)
    }
}

fn convert_triplet(from: ColorSpace, to: ColorSpace, p: [f64; 3]) -> [f64; 3] {
    use ColorSpace::*;
    match (from, to) {
        (Srgb, LinearRgb) => p.map(srgb_to_linear_component),
        (LinearRgb, Srgb) => p.map(linear_to_srgb_component),
        (Srgb, Cielab) => srgb_to_lab(p),
        (Cielab, Srgb) => lab_to_srgb(p),
        (LinearRgb, Cielab) => linear_to_lab(p),
        (Cielab, LinearRgb) => lab_to_linear(p),
        _ => p,
    }
}

/// Converts the first three channels of `img` into `target`; alpha, when
/// present, is copied unchanged.
pub fn color_convert(img: &ImageBuf, target: ColorSpace) -> Result<ImageBuf, ImageError> {
    let from = img.space();
    if from == ColorSpace::Alpha || target == ColorSpace::Alpha || img.channels() < 3 {
        return Err(ImageError::Conversion { from, to: target });
    }
    if from == target {
        return Ok(img.clone());
    }
    let c = img.channels();
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        let q = convert_triplet(from, target, [px[0] as f64, px[1] as f64, px[2] as f64]);
        px[0] = q[0] as f32;
        px[1] = q[1] as f32;
        px[2] = q[2] as f32;
    }
    Ok(out.retag(target))
}

/// `base + alpha * residual` in CIELAB, returned as gamut-clamped sRGB.
///
/// `base` may carry an alpha channel, which is passed through.
pub fn composite_residual(
    base: &ImageBuf,
    residual: &ImageBuf,
    alpha: &ImageBuf,
) -> Result<ImageBuf, ImageError> {
    if base.space() != ColorSpace::Cielab {
        return Err(ImageError::WrongSpace {
            expected: ColorSpace::Cielab,
            got: base.space(),
        });
    }
    if !base.same_dims(residual) || !base.same_dims(alpha) {
        return Err(ImageError::DimensionMismatch(format!(
            "base {}x{}, residual {}x{}, alpha {}x{}",
            base.width(),
            base.height(),
            residual.width(),
            residual.height(),
            alpha.width(),
            alpha.height()
        )));
    }
    if residual.channels() != 3 || alpha.channels() != 1 {
        return Err(ImageError::DimensionMismatch(
            "residual must have 3 channels and alpha 1".into(),
        ));
    }
    let c = base.channels();
    let mut out = base.clone();
    for (i, px) in out.data_mut().chunks_exact_mut(c).enumerate() {
        let a = alpha.data()[i] as f64;
        let r = residual.px(i);
        let lab = [
            px[0] as f64 + a * r[0] as f64,
            px[1] as f64 + a * r[1] as f64,
            px[2] as f64 + a * r[2] as f64,
        ];
        let rgb = lab_to_srgb(lab);
        for k in 0..3 {
            px[k] = rgb[k].clamp(0.0, 1.0) as f32;
        }
    }
    Ok(out.retag(ColorSpace::Srgb))
}
