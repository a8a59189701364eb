use super::{normal_z, GeomError, LandmarkSet, MeshTopology};
use crate::imgcore::ImageBuf;

const MIN_TRIANGLE_AREA: f64 = 1e-12;
const INSIDE_TOL: f64 = 1e-12;

/// Barycentric weights of `p` in triangle `tri`. `None` for a degenerate
/// triangle.
pub fn barycentric(p: [f64; 2], tri: [[f64; 2]; 3]) -> Option<[f64; 3]> {
    let [a, b, c] = tri;
    let d = normal_z(a, b, c);
    if d == 0.0 {
        return None;
    }
    let w1 = normal_z(a, p, c) / d;
    let w2 = normal_z(a, b, p) / d;
    Some([1.0 - w1 - w2, w1, w2])
}

/// Per-triangle destination→source affine maps in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    /// `[[a, b, c], [d, e, f]]` so that `src = (a x + b y + c, d x + e y + f)`.
    pub affines: Vec<[[f64; 3]; 2]>,
    pub visible: Vec<bool>,
    /// Indices of triangles dropped for a degenerate destination.
    pub skipped: Vec<usize>,
    dst_tris: Vec<[[f64; 2]; 3]>,
}

impl WarpField {
    pub fn triangle_count(&self) -> usize {
        self.affines.len()
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    /// Maps a normalized destination point through triangle `t`.
    #[inline]
    pub fn map(&self, t: usize, p: [f64; 2]) -> [f64; 2] {
        let m = &self.affines[t];
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
        ]
    }

    pub fn dst_triangle(&self, t: usize) -> [[f64; 2]; 3] {
        self.dst_tris[t]
    }

    /// Owning triangle for every pixel center of a `width × height`
    /// destination. The lowest-index visible triangle containing a pixel
    /// wins.
    pub fn coverage(&self, width: usize, height: usize) -> Vec<Option<u32>> {
        let mut owner: Vec<Option<u32>> = vec![None; width * height];
        if width == 0 || height == 0 {
            return owner;
        }
        let (wf, hf) = (width as f64, height as f64);
        for (t, tri) in self.dst_tris.iter().enumerate() {
            if !self.visible[t] {
                continue;
            }
            let xs = tri.iter().map(|p| p[0] * wf - 0.5);
            let ys = tri.iter().map(|p| p[1] * hf - 0.5);
            let (x0, x1) = minmax(xs);
            let (y0, y1) = minmax(ys);
            let x0 = (x0.floor().max(0.0)) as usize;
            let y0 = (y0.floor().max(0.0)) as usize;
            let x1 = x1.ceil().min(wf - 1.0);
            let y1 = y1.ceil().min(hf - 1.0);
            if x1 < 0.0 || y1 < 0.0 {
                continue;
            }
            let (x1, y1) = (x1 as usize, y1 as usize);
            for py in y0..=y1 {
                for px in x0..=x1 {
                    let slot = &mut owner[py * width + px];
                    if slot.is_some() {
                        continue;
                    }
                    let p = [(px as f64 + 0.5) / wf, (py as f64 + 0.5) / hf];
                    if let Some(w) = barycentric(p, *tri) {
                        if w.iter().all(|&v| v >= -INSIDE_TOL) {
                            *slot = Some(t as u32);
                        }
                    }
                }
            }
        }
        owner
    }
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Fits one affine map per triangle taking `dst` vertices onto `src`
/// vertices.
///
/// With `cull_backfaces`, a triangle is invisible when it faces away from
/// the camera in either landmark set: hidden in the source means there is
/// nothing to sample, hidden in the destination means nothing to draw.
pub fn build_warp(
    src: &LandmarkSet,
    dst: &LandmarkSet,
    topo: &MeshTopology,
    cull_backfaces: bool,
) -> Result<WarpField, GeomError> {
    if src.topology_id != dst.topology_id {
        return Err(GeomError::TopologyMismatch(format!(
            "'{}' vs '{}'",
            src.topology_id, dst.topology_id
        )));
    }
    topo.check(src)?;
    topo.check(dst)?;

    let n = topo.triangles.len();
    let mut affines = Vec::with_capacity(n);
    let mut visible = Vec::with_capacity(n);
    let mut skipped = Vec::new();
    let mut dst_tris = Vec::with_capacity(n);

    for (t, tri) in topo.triangles.iter().enumerate() {
        let d = tri.map(|i| dst.xy(i));
        let s = tri.map(|i| src.xy(i));
        dst_tris.push(d);
        let nz_dst = normal_z(d[0], d[1], d[2]);
        if 0.5 * nz_dst.abs() < MIN_TRIANGLE_AREA {
            skipped.push(t);
            affines.push([[0.0; 3]; 2]);
            visible.push(false);
            continue;
        }
        let nz_src = normal_z(s[0], s[1], s[2]);
        let facing = nz_dst <= 0.0 && nz_src <= 0.0;
        visible.push(!cull_backfaces || facing);
        affines.push(fit_affine(d, s, nz_dst));
    }

    Ok(WarpField {
        affines,
        visible,
        skipped,
        dst_tris,
    })
}

// src = Σ w_i(p) s_i with w the barycentric weights of p in d; expanding the
// weights as affine functions of p gives the matrix directly.
fn fit_affine(d: [[f64; 2]; 3], s: [[f64; 2]; 3], det: f64) -> [[f64; 3]; 2] {
    let [a, b, c] = d;
    // w1 = normal_z(a, p, c) / det, w2 = normal_z(a, b, p) / det
    let w1 = [(c[1] - a[1]) / det, -(c[0] - a[0]) / det];
    let w1c = -(w1[0] * a[0] + w1[1] * a[1]);
    let w2 = [-(b[1] - a[1]) / det, (b[0] - a[0]) / det];
    let w2c = -(w2[0] * a[0] + w2[1] * a[1]);
    let mut m = [[0.0; 3]; 2];
    for k in 0..2 {
        let e1 = s[1][k] - s[0][k];
        let e2 = s[2][k] - s[0][k];
        m[k][0] = e1 * w1[0] + e2 * w2[0];
        m[k][1] = e1 * w1[1] + e2 * w2[1];
        m[k][2] = s[0][k] + e1 * w1c + e2 * w2c;
    }
    m
}

/// Warps `img` into a destination of the same size.
pub fn warp_image(img: &ImageBuf, field: &WarpField) -> ImageBuf {
    warp_image_to(img, field, img.width(), img.height())
}

/// Warps `img` into a `width × height` destination. Covered pixels are
/// bilinearly sampled (source edges clamp); uncovered pixels are all-zero,
/// which for RGBA means fully transparent.
pub fn warp_image_to(img: &ImageBuf, field: &WarpField, width: usize, height: usize) -> ImageBuf {
    let c = img.channels();
    let mut out = ImageBuf::zeros(width, height, c, img.space());
    let owner = field.coverage(width, height);
    let (wf, hf) = (width as f64, height as f64);
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    for (i, t) in owner.iter().enumerate() {
        let Some(t) = *t else { continue };
        let px = (i % width) as f64;
        let py = (i / width) as f64;
        let p = [(px + 0.5) / wf, (py + 0.5) / hf];
        let q = field.map(t as usize, p);
        let dst = out.px_mut(i);
        sample_bilinear(img, q[0] * sw - 0.5, q[1] * sh - 0.5, dst);
    }
    out
}

fn sample_bilinear(img: &ImageBuf, x: f64, y: f64, dst: &mut [f32]) {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return;
    }
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);
    for k in 0..dst.len() {
        let top = p00[k] as f64 * (1.0 - fx) + p10[k] as f64 * fx;
        let bot = p01[k] as f64 * (1.0 - fx) + p11[k] as f64 * fx;
        dst[k] = (top * (1.0 - fy) + bot * fy) as f32;
    }
}
