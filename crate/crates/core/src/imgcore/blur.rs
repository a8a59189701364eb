use super::ImageBuf;

/// Normalized 1-D Gaussian taps for `sigma`, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur over every channel with edge-clamped borders.
pub fn gaussian_blur(img: &ImageBuf, sigma: f64) -> ImageBuf {
    if sigma <= 0.0 || img.len_pixels() == 0 {
        return img.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let src = img.data();

    let mut tmp = vec![0.0f64; w * h * c];
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            for (k, tap) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                let s = (row + sx) * c;
                let d = (row + x) * c;
                for ch in 0..c {
                    tmp[d + ch] += tap * src[s + ch] as f64;
                }
            }
        }
    }

    let mut out = img.clone();
    let dst = out.data_mut();
    let mut acc = vec![0.0f64; c];
    for y in 0..h {
        for x in 0..w {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (k, tap) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                let s = (sy * w + x) * c;
                for ch in 0..c {
                    acc[ch] += tap * tmp[s + ch];
                }
            }
            let d = (y * w + x) * c;
            for ch in 0..c {
                dst[d + ch] = acc[ch] as f32;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ColorSpace;

    #[test]
    fn constant_is_fixed_point() {
        let img = ImageBuf::filled(20, 15, ColorSpace::Srgb, &[0.5, 0.5, 0.5]);
        let out = gaussian_blur(&img, 5.0);
        assert!(out.data().iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let data: Vec<f32> = (0..48).map(|i| (i as f32 * 0.37).sin().abs()).collect();
        let img = ImageBuf::new(4, 4, 3, ColorSpace::Srgb, data).unwrap();
        assert_eq!(gaussian_blur(&img, 0.0), img);
    }

    #[test]
    fn impulse_response_is_outer_product_of_taps() {
        // Oracle: evaluate exp(-(dx^2+dy^2)/2) directly and normalize over the
        // 7x7 support.
        let n = 15;
        let mut img = ImageBuf::zeros(n, n, 1, ColorSpace::Alpha);
        img.pixel_mut(7, 7)[0] = 1.0;
        let out = gaussian_blur(&img, 1.0);
        let mut oracle = [[0.0f64; 7]; 7];
        let mut total = 0.0;
        for (i, row) in oracle.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let dy = i as f64 - 3.0;
                let dx = j as f64 - 3.0;
                *v = (-(dx * dx + dy * dy) / 2.0).exp();
                total += *v;
            }
        }
        for y in 0..n {
            for x in 0..n {
                let got = out.pixel(x, y)[0] as f64;
                let (dy, dx) = (y as i64 - 7, x as i64 - 7);
                let want = if dy.abs() <= 3 && dx.abs() <= 3 {
                    oracle[(dy + 3) as usize][(dx + 3) as usize] / total
                } else {
                    0.0
                };
                assert!((got - want).abs() < 1e-7, "({x},{y}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn mean_preserved_on_padded_image() {
        // A bump well inside a constant frame: clamped borders only see the
        // constant, so the total mass is conserved.
        let n = 40;
        let mut img = ImageBuf::filled(n, n, ColorSpace::Alpha, &[0.25]);
        for y in 15..25 {
            for x in 12..22 {
                img.pixel_mut(x, y)[0] = 0.25 + ((x * y) % 7) as f32 * 0.1;
            }
        }
        let mean = |im: &ImageBuf| im.data().iter().map(|&v| v as f64).sum::<f64>() / (n * n) as f64;
        let out = gaussian_blur(&img, 2.0);
        assert!((mean(&img) - mean(&out)).abs() < 1e-5);
    }
}
