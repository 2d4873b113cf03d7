use std::io::Cursor;

use image::imageops::FilterType;
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, LumaA, Pixel, Rgb, Rgba};
use serde::{Deserialize, Serialize};

use super::{ExecStatus, ExecutionResult, SandboxError};
use crate::client::ImagePayload;

/// Border and size cap applied to every image before it is sent to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostProcessConfig {
    pub border_px: u32,
    pub border_color: [u8; 3],
    pub max_dimension_px: u32,
}

impl Default for PostProcessConfig {
    fn default() -> Self {
        Self {
            border_px: 32,
            border_color: [255, 255, 255],
            max_dimension_px: 768,
        }
    }
}

impl PostProcessConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_dimension_px < 64 {
            return Err(format!(
                "max_dimension_px must be at least 64, got {}",
                self.max_dimension_px
            ));
        }
        Ok(())
    }
}

fn framed<P: Pixel>(src: &ImageBuffer<P, Vec<P::Subpixel>>, border: u32, fill: P) -> ImageBuffer<P, Vec<P::Subpixel>> {
    let (w, h) = src.dimensions();
    let mut out = ImageBuffer::from_pixel(w + 2 * border, h + 2 * border, fill);
    image::imageops::replace(&mut out, src, i64::from(border), i64::from(border));
    out
}

fn gray(color: [u8; 3]) -> u8 {
    let [r, g, b] = color.map(u32::from);
    ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
}

/// Pads the image with `border_px` of `color` on every side. The pixel layout
/// (channel count) is preserved for 8-bit images; other layouts are
/// converted to RGBA8 first.
pub fn add_border(image: &DynamicImage, border_px: u32, color: [u8; 3]) -> DynamicImage {
    if border_px == 0 {
        return image.clone();
    }
    let [r, g, b] = color;
    match image {
        DynamicImage::ImageLuma8(buf) => DynamicImage::ImageLuma8(framed(buf, border_px, Luma([gray(color)]))),
        DynamicImage::ImageLumaA8(buf) => DynamicImage::ImageLumaA8(framed(buf, border_px, LumaA([gray(color), 255]))),
        DynamicImage::ImageRgb8(buf) => DynamicImage::ImageRgb8(framed(buf, border_px, Rgb([r, g, b]))),
        DynamicImage::ImageRgba8(buf) => DynamicImage::ImageRgba8(framed(buf, border_px, Rgba([r, g, b, 255]))),
        other => DynamicImage::ImageRgba8(framed(&other.to_rgba8(), border_px, Rgba([r, g, b, 255]))),
    }
}

/// Target size when capping the longer side at `max_dimension`; the shorter
/// side is rounded half up and never collapses below one pixel.
pub fn scaled_dimensions(width: u32, height: u32, max_dimension: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= max_dimension {
        return (width, height);
    }
    let scale = |side: u32| -> u32 {
        let (side, max, longest) = (u64::from(side), u64::from(max_dimension), u64::from(longest));
        (((2 * side * max + longest) / (2 * longest)) as u32).max(1)
    };
    if width >= height {
        (max_dimension, scale(height))
    } else {
        (scale(width), max_dimension)
    }
}

/// Bilinear downscale so the longer side equals `max_dimension`; identity
/// when the image already fits.
pub fn resize_max(image: &DynamicImage, max_dimension: u32) -> DynamicImage {
    let (w, h) = (image.width(), image.height());
    let (nw, nh) = scaled_dimensions(w, h, max_dimension);
    if (nw, nh) == (w, h) {
        return image.clone();
    }
    image.resize_exact(nw, nh, FilterType::Triangle)
}

pub fn decode_image(bytes: &[u8]) -> Result<DynamicImage, SandboxError> {
    image::load_from_memory(bytes).map_err(|e| SandboxError::Decode(e.to_string()))
}

pub fn encode_png(image: &DynamicImage) -> Result<Vec<u8>, SandboxError> {
    let mut bytes = Vec::new();
    image
        .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| SandboxError::Decode(e.to_string()))?;
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedPayload {
    pub payload: ImagePayload,
    pub width: u32,
    pub height: u32,
}

/// Border, then size cap, applied to the first produced image, re-encoded as
/// PNG.
pub fn prepare_for_query(
    result: &ExecutionResult,
    config: &PostProcessConfig,
) -> Result<PreparedPayload, SandboxError> {
    if result.status != ExecStatus::Ok {
        return Err(SandboxError::Precondition(result.status.as_str()));
    }
    let first = result
        .images
        .first()
        .ok_or(SandboxError::Precondition("ok without images"))?;
    let bytes = std::fs::read(&first.path)?;
    prepare_image(&decode_image(&bytes)?, config)
}

pub fn prepare_image(image: &DynamicImage, config: &PostProcessConfig) -> Result<PreparedPayload, SandboxError> {
    let bordered = add_border(image, config.border_px, config.border_color);
    let resized = resize_max(&bordered, config.max_dimension_px);
    Ok(PreparedPayload {
        payload: ImagePayload::png(encode_png(&resized)?),
        width: resized.width(),
        height: resized.height(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::RasterArtifact;
    use image::GenericImageView;

    fn checker(w: u32, h: u32) -> DynamicImage {
        DynamicImage::ImageRgb8(ImageBuffer::from_fn(w, h, |x, y| {
            if (x + y) % 2 == 0 {
                Rgb([10, 20, 30])
            } else {
                Rgb([200, 100, 0])
            }
        }))
    }

    #[test]
    fn border_dimensions() {
        let out = add_border(&checker(100, 80), 32, [255, 255, 255]);
        assert_eq!(out.dimensions(), (164, 144));
        assert_eq!(out.get_pixel(0, 0), Rgba([255, 255, 255, 255]));
        assert_eq!(out.get_pixel(32, 32), checker(100, 80).get_pixel(0, 0));
    }

    #[test]
    fn zero_border_is_identity() {
        let img = checker(17, 9);
        assert_eq!(add_border(&img, 0, [255, 255, 255]), img);
    }

    #[test]
    fn border_keeps_channel_layout() {
        let gray = DynamicImage::ImageLuma8(ImageBuffer::from_pixel(5, 5, Luma([0])));
        let out = add_border(&gray, 2, [255, 255, 255]);
        assert!(matches!(out, DynamicImage::ImageLuma8(_)));
        assert_eq!(out.as_luma8().unwrap().get_pixel(0, 0), &Luma([255]));
    }

    #[test]
    fn scaled_dimension_examples() {
        assert_eq!(scaled_dimensions(1000, 500, 768), (768, 384));
        assert_eq!(scaled_dimensions(300, 300, 768), (300, 300));
        assert_eq!(scaled_dimensions(500, 1000, 768), (384, 768));
        // 2064x1064 capped at 768: 1064*768/2064 = 395.9 -> 396
        assert_eq!(scaled_dimensions(2064, 1064, 768), (768, 396));
    }

    #[test]
    fn resize_identity_when_small() {
        let img = checker(300, 300);
        assert_eq!(resize_max(&img, 768), img);
        assert_eq!(resize_max(&checker(1000, 500), 768).dimensions(), (768, 384));
    }

    fn ok_result(path: std::path::PathBuf, w: u32, h: u32) -> ExecutionResult {
        ExecutionResult {
            status: ExecStatus::Ok,
            images: vec![RasterArtifact {
                path,
                width: w,
                height: h,
            }],
            stdout: String::new(),
            stderr: String::new(),
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn prepare_composes_border_then_resize() {
        let dir = tempfile::tempdir().unwrap();
        let small = dir.path().join("small.png");
        checker(600, 600).save(&small).unwrap();
        let prepared = prepare_for_query(&ok_result(small, 600, 600), &PostProcessConfig::default()).unwrap();
        assert_eq!((prepared.width, prepared.height), (664, 664));
        let decoded = decode_image(&prepared.payload.bytes).unwrap();
        assert_eq!(decoded.dimensions(), (664, 664));

        let large = dir.path().join("large.png");
        checker(2000, 1000).save(&large).unwrap();
        let prepared = prepare_for_query(&ok_result(large, 2000, 1000), &PostProcessConfig::default()).unwrap();
        assert_eq!((prepared.width, prepared.height), (768, 396));
    }

    #[test]
    fn prepare_requires_ok() {
        let mut result = ok_result("x.png".into(), 1, 1);
        result.status = ExecStatus::Timeout;
        result.images.clear();
        assert!(matches!(
            prepare_for_query(&result, &PostProcessConfig::default()),
            Err(SandboxError::Precondition("timeout"))
        ));
    }

    #[test]
    fn decode_error() {
        assert!(matches!(decode_image(b"not an image"), Err(SandboxError::Decode(_))));
    }
}
