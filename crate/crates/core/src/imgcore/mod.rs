//! Floating-point image buffers, color conversion, blurring and residual
//! compositing.
//!
//! Every raster in the crate is an [`ImageBuf`]: row-major `f32` samples
//! with an explicit color-space tag. sRGB and linear samples live in
//! `[0, 1]`, CIELAB uses `L ∈ [0, 100]` and `a, b ∈ [-128, 128]`, and the
//! optional fourth channel is a straight (non premultiplied) alpha.

mod blur;
mod color;
mod io;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use color::{
    color_convert, composite_residual, lab_to_srgb, linear_to_srgb_component, srgb_to_lab,
    srgb_to_linear_component, HclColor, WHITE_D65,
};
pub use io::{
    decode_label_png, decode_png, encode_png, load_label_png, load_png, save_label_png, save_png,
    BitDepth,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("buffer length {len} does not match {width}x{height}x{channels}")]
    BadLength {
        len: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("unsupported channel count {0}")]
    BadChannels(usize),
    #[error("cannot convert from {from:?} to {to:?}")]
    Conversion { from: ColorSpace, to: ColorSpace },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image not in expected color space: expected {expected:?}, got {got:?}")]
    WrongSpace { expected: ColorSpace, got: ColorSpace },
    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Color-space tag carried by every buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Srgb,
    LinearRgb,
    Cielab,
    /// Single-channel coverage / opacity in `[0, 1]`.
    Alpha,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf {
    width: usize,
    height: usize,
    channels: usize,
    space: ColorSpace,
    data: Vec<f32>,
}

impl ImageBuf {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        space: ColorSpace,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        if !matches!(channels, 1 | 3 | 4) {
            return Err(ImageError::BadChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::BadLength {
                len: data.len(),
                width,
                height,
                channels,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            space,
            data,
        })
    }

    /// Buffer with every pixel set to `pixel`; the channel count is `pixel.len()`.
    pub fn filled(width: usize, height: usize, space: ColorSpace, pixel: &[f32]) -> Self {
        let channels = pixel.len();
        assert!(matches!(channels, 1 | 3 | 4), "unsupported channel count");
        let mut data = Vec::with_capacity(width * height * channels);
        for _ in 0..width * height {
            data.extend_from_slice(pixel);
        }
        Self {
            width,
            height,
            channels,
            space,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, channels: usize, space: ColorSpace) -> Self {
        Self::filled(width, height, space, &vec![0.0; channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn has_alpha(&self) -> bool {
        self.channels == 4
    }

    pub fn len_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_dims(&self, other: &ImageBuf) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Pixel by flat index.
    #[inline]
    pub fn px(&self, i: usize) -> &[f32] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    #[inline]
    pub fn px_mut(&mut self, i: usize) -> &mut [f32] {
        let c = self.channels;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    /// Alpha of pixel `i`: channel 3 for RGBA, the sample itself for
    /// single-channel alpha buffers, 1 otherwise.
    #[inline]
    pub fn alpha_at(&self, i: usize) -> f32 {
        match (self.channels, self.space) {
            (4, _) => self.data[i * 4 + 3],
            (1, ColorSpace::Alpha) => self.data[i],
            _ => 1.0,
        }
    }

    /// Extracts one channel into a single-channel buffer tagged `space`.
    pub fn channel(&self, c: usize, space: ColorSpace) -> ImageBuf {
        let data = self.pixels().map(|p| p[c]).collect();
        ImageBuf {
            width: self.width,
            height: self.height,
            channels: 1,
            space,
            data,
        }
    }

    /// First three channels only.
    pub fn color_only(&self) -> ImageBuf {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self
            .pixels()
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect();
        ImageBuf {
            width: self.width,
            height: self.height,
            channels: 3,
            space: self.space,
            data,
        }
    }

    /// Appends (or replaces) an alpha channel.
    pub fn with_alpha(&self, alpha: &ImageBuf) -> Result<ImageBuf, ImageError> {
        if !self.same_dims(alpha) || alpha.channels != 1 {
            return Err(ImageError::DimensionMismatch(
                "alpha must be single-channel with matching size".into(),
            ));
        }
        if self.channels < 3 {
            return Err(ImageError::BadChannels(self.channels));
        }
        let mut data = Vec::with_capacity(self.len_pixels() * 4);
        for (p, a) in self.pixels().zip(alpha.data.iter()) {
            data.extend_from_slice(&[p[0], p[1], p[2], *a]);
        }
        Ok(ImageBuf {
            width: self.width,
            height: self.height,
            channels: 4,
            space: self.space,
            data,
        })
    }

    /// RGBA with color multiplied by alpha. Other layouts are returned as is.
    pub fn premultiplied(&self) -> ImageBuf {
        let mut out = self.clone();
        if self.channels == 4 {
            for p in out.data.chunks_exact_mut(4) {
                let a = p[3];
                p[0] *= a;
                p[1] *= a;
                p[2] *= a;
            }
        }
        out
    }

    /// Inverse of [`premultiplied`](Self::premultiplied); fully transparent
    /// pixels get zero color.
    pub fn unpremultiplied(&self) -> ImageBuf {
        let mut out = self.clone();
        if self.channels == 4 {
            for p in out.data.chunks_exact_mut(4) {
                let a = p[3];
                if a > 0.0 {
                    p[0] /= a;
                    p[1] /= a;
                    p[2] /= a;
                } else {
                    p[0] = 0.0;
                    p[1] = 0.0;
                    p[2] = 0.0;
                }
            }
        }
        out
    }

    pub(crate) fn retag(mut self, space: ColorSpace) -> ImageBuf {
        self.space = space;
        self
    }
}
