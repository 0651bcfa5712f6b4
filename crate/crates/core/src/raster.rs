//! Raster image primitives: loading, bilinear resizing, cropping, and
//! per-channel normalization.
//!
//! Everything here is deterministic and pure. Pixels are stored row-major,
//! interleaved RGB, 8 bits per sample. All resampling is plain bilinear with
//! half-pixel centers and edge clamping, so a resize to the source dimensions
//! is a bitwise identity and constant images stay constant under any target
//! size.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Number of channels in every [`ImageBuffer`]. Grayscale and palette inputs
/// are expanded to RGB at load; alpha is dropped.
pub const CHANNELS: usize = 3;

/// Per-channel normalization mean used by the vision path unless overridden.
pub const DEFAULT_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
/// Per-channel normalization std used by the vision path unless overridden.
pub const DEFAULT_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Decoded raster image: `height` rows of `width` interleaved RGB pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    /// Builds a buffer from raw interleaved RGB samples.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::arg(format!(
                "pixel data length {} does not match {width}x{height}x{CHANNELS} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        CHANNELS
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Sample one channel of the pixel at `(x, y)`.
    pub fn sample(&self, x: u32, y: u32, c: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height && c < CHANNELS);
        self.data[(y as usize * self.width as usize + x as usize) * CHANNELS + c]
    }
}

/// Floating-point image tensor, the output of [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTensor {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl PixelTensor {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        CHANNELS
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sample(&self, x: u32, y: u32, c: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height && c < CHANNELS);
        self.data[(y as usize * self.width as usize + x as usize) * CHANNELS + c]
    }
}

/// Loads a PNG or JPEG file into an RGB buffer.
///
/// Grayscale samples are replicated across the three channels, palettes are
/// expanded, and alpha is discarded. Decoding identical files yields
/// identical buffers.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = image::load_from_memory(&bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    ImageBuffer::from_raw(rgb.width(), rgb.height(), rgb.into_raw())
}

/// Encodes a buffer as PNG at `path`.
pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer(
        path,
        img.data(),
        img.width(),
        img.height(),
        image::ColorType::Rgb8,
    )
    .map_err(|source| Error::Encode {
        path: path.to_path_buf(),
        source,
    })
}

/// Encodes a buffer as PNG in memory.
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let mut bytes = Vec::new();
    image::codecs::png::PngEncoder::new(&mut bytes)
        .write_image(
            img.data(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Encode {
            path: PathBuf::from("<memory>"),
            source,
        })?;
    Ok(bytes)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear resize to exactly `(target_w, target_h)`.
///
/// Source coordinates use the half-pixel-center convention
/// `sx = (ox + 0.5) * src_w / dst_w - 0.5` with edge clamping. Interpolation
/// runs in f64 and rounds once at the end, so the operation is deterministic
/// and an identity when the target equals the source dimensions.
pub fn resize(img: &ImageBuffer, target_w: u32, target_h: u32) -> Result<ImageBuffer> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::arg(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    if target_w == img.width() && target_h == img.height() {
        return Ok(img.clone());
    }

    let sw = img.width() as usize;
    let sh = img.height() as usize;
    let scale_x = img.width() as f64 / target_w as f64;
    let scale_y = img.height() as f64 / target_h as f64;

    let clamp = |v: i64, hi: usize| -> usize { v.clamp(0, hi as i64 - 1) as usize };

    let mut out = vec![0u8; target_w as usize * target_h as usize * CHANNELS];
    for oy in 0..target_h as usize {
        let sy = (oy as f64 + 0.5) * scale_y - 0.5;
        let y0 = sy.floor();
        let ty = sy - y0;
        let y0i = clamp(y0 as i64, sh);
        let y1i = clamp(y0 as i64 + 1, sh);
        for ox in 0..target_w as usize {
            let sx = (ox as f64 + 0.5) * scale_x - 0.5;
            let x0 = sx.floor();
            let tx = sx - x0;
            let x0i = clamp(x0 as i64, sw);
            let x1i = clamp(x0 as i64 + 1, sw);
            for c in 0..CHANNELS {
                let at = |x: usize, y: usize| img.data[(y * sw + x) * CHANNELS + c] as f64;
                let top = lerp(at(x0i, y0i), at(x1i, y0i), tx);
                let bottom = lerp(at(x0i, y1i), at(x1i, y1i), tx);
                let v = lerp(top, bottom, ty);
                out[(oy * target_w as usize + ox) * CHANNELS + c] =
                    v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    ImageBuffer::from_raw(target_w, target_h, out)
}

/// Axis-aligned pixel box, `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Copies the boxed region out of `img` without resampling.
pub fn crop(img: &ImageBuffer, bounds: PixelBox) -> Result<ImageBuffer> {
    if bounds.w == 0 || bounds.h == 0 {
        return Err(Error::arg(format!(
            "crop box must be non-empty, got {}x{}",
            bounds.w, bounds.h
        )));
    }
    let x_end = bounds.x.checked_add(bounds.w);
    let y_end = bounds.y.checked_add(bounds.h);
    match (x_end, y_end) {
        (Some(xe), Some(ye)) if xe <= img.width() && ye <= img.height() => {}
        _ => {
            return Err(Error::arg(format!(
                "crop box {bounds:?} exceeds image bounds {}x{}",
                img.width(),
                img.height()
            )))
        }
    }

    let sw = img.width() as usize;
    let row_bytes = bounds.w as usize * CHANNELS;
    let mut out = Vec::with_capacity(bounds.h as usize * row_bytes);
    for row in 0..bounds.h as usize {
        let src_y = bounds.y as usize + row;
        let start = (src_y * sw + bounds.x as usize) * CHANNELS;
        out.extend_from_slice(&img.data[start..start + row_bytes]);
    }
    ImageBuffer::from_raw(bounds.w, bounds.h, out)
}

/// Per-channel affine normalization: `(x / 255 - mean[c]) / std[c]`.
pub fn normalize(img: &ImageBuffer, mean: [f64; 3], std: [f64; 3]) -> Result<PixelTensor> {
    if std.contains(&0.0) {
        return Err(Error::arg("normalization std must be nonzero".to_string()));
    }
    let mut data = Vec::with_capacity(img.data.len());
    for (i, &v) in img.data.iter().enumerate() {
        let c = i % CHANNELS;
        data.push((v as f64 / 255.0 - mean[c]) / std[c]);
    }
    Ok(PixelTensor {
        width: img.width,
        height: img.height,
        data,
    })
}
