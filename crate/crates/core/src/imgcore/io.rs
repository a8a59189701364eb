use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb, Rgba};

use super::{color_convert, ColorSpace, ImageBuf, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Loads an 8- or 16-bit PNG as sRGB floats. Grayscale is expanded to RGB;
/// images with an alpha channel keep it as channel 3.
pub fn load_png(path: impl AsRef<Path>) -> Result<ImageBuf, ImageError> {
    let img = image::open(path)?;
    from_dynamic(&img)
}

pub(crate) fn from_dynamic(img: &DynamicImage) -> Result<ImageBuf, ImageError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_alpha() {
        let buf = img.to_rgba32f();
        ImageBuf::new(w, h, 4, ColorSpace::Srgb, buf.into_raw())
    } else {
        let buf = img.to_rgb32f();
        ImageBuf::new(w, h, 3, ColorSpace::Srgb, buf.into_raw())
    }
}

fn quantize8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn quantize16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub(crate) fn to_dynamic(img: &ImageBuf, depth: BitDepth) -> Result<DynamicImage, ImageError> {
    let img = match img.space() {
        ColorSpace::Srgb | ColorSpace::Alpha => img.clone(),
        _ => color_convert(img, ColorSpace::Srgb)?,
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bad = || ImageError::BadLength {
        len: img.data().len(),
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
    };
    let dynimg = match (img.channels(), depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize8(v)).collect())
                .ok_or_else(bad)?,
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize16(v)).collect())
                .ok_or_else(bad)?,
        ),
        (3, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize8(v)).collect())
                .ok_or_else(bad)?,
        ),
        (3, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize16(v)).collect())
                .ok_or_else(bad)?,
        ),
        (4, BitDepth::Eight) => DynamicImage::ImageRgba8(
            ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize8(v)).collect())
                .ok_or_else(bad)?,
        ),
        (4, BitDepth::Sixteen) => DynamicImage::ImageRgba16(
            ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, img.data().iter().map(|&v| quantize16(v)).collect())
                .ok_or_else(bad)?,
        ),
        (c, _) => return Err(ImageError::BadChannels(c)),
    };
    Ok(dynimg)
}

/// Writes `img` as PNG. Non-sRGB color buffers are converted first;
/// single-channel buffers become grayscale.
pub fn save_png(img: &ImageBuf, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), ImageError> {
    let dynimg = to_dynamic(img, depth)?;
    dynimg.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// PNG-encodes `img` into memory.
pub fn encode_png(img: &ImageBuf, depth: BitDepth) -> Result<Vec<u8>, ImageError> {
    let dynimg = to_dynamic(img, depth)?;
    let mut out = std::io::Cursor::new(Vec::new());
    dynimg.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageBuf, ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    from_dynamic(&img)
}

/// Reads an 8-bit label PNG (one label id per pixel). Color PNGs use the red
/// channel.
pub fn load_label_png(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u32>), ImageError> {
    let img = image::open(path)?;
    Ok(labels_from_dynamic(&img))
}

pub fn decode_label_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u32>), ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    Ok(labels_from_dynamic(&img))
}

fn labels_from_dynamic(img: &DynamicImage) -> (usize, usize, Vec<u32>) {
    let luma = img.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let labels = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            luma.into_raw().into_iter().map(u32::from).collect()
        }
        _ => img.to_rgb8().pixels().map(|p| p.0[0] as u32).collect(),
    };
    (w, h, labels)
}

pub fn save_label_png(
    width: usize,
    height: usize,
    labels: &[u32],
    path: impl AsRef<Path>,
) -> Result<(), ImageError> {
    let raw: Vec<u8> = labels.iter().map(|&l| l.min(255) as u8).collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, raw).ok_or(
        ImageError::BadLength {
            len: labels.len(),
            width,
            height,
            channels: 1,
        },
    )?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_8_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..5 * 4 * 4).map(|i| (i % 17) as f32 / 16.0).collect();
        let img = ImageBuf::new(5, 4, 4, ColorSpace::Srgb, data).unwrap();

        let p8 = dir.path().join("a8.png");
        save_png(&img, &p8, BitDepth::Eight).unwrap();
        let back = load_png(&p8).unwrap();
        assert_eq!(back.channels(), 4);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }

        let p16 = dir.path().join("a16.png");
        save_png(&img, &p16, BitDepth::Sixteen).unwrap();
        let back = load_png(&p16).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-6);
        }
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let labels = vec![0, 1, 2, 17, 255, 3];
        save_label_png(3, 2, &labels, &p).unwrap();
        let (w, h, got) = load_label_png(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(got, labels);
    }
}
