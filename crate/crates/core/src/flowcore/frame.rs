use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::{Error, Result};

/// Grayscale or RGB raster with interleaved float samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!("frames have 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::NonFinite(format!("sample {bad} = {} is outside [0, 1]", data[bad])));
        }
        Ok(ImageFrame { width, height, channels, data })
    }

    /// Builds a frame from samples that may stray outside `[0, 1]`; values are clamped.
    pub fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite("frame sample is NaN or infinite".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Rec. 601 luma; grayscale frames are returned unchanged.
    pub fn to_luma(&self) -> ImageFrame {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self.data.chunks_exact(3).map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0)).collect();
        ImageFrame { width: self.width, height: self.height, channels: 1, data }
    }

    pub fn same_shape(&self, other: &ImageFrame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Two frames of identical geometry, the input `x` of a flow estimator.
#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a> {
    pub first: &'a ImageFrame,
    pub second: &'a ImageFrame,
}

impl<'a> FramePair<'a> {
    pub fn new(first: &'a ImageFrame, second: &'a ImageFrame) -> Result<Self> {
        if !first.same_shape(second) {
            return Err(Error::Dimension(format!(
                "pair frames differ: {}x{}x{} vs {}x{}x{}",
                first.width, first.height, first.channels, second.width, second.height, second.channels
            )));
        }
        Ok(FramePair { first, second })
    }

    pub fn width(&self) -> usize {
        self.first.width
    }

    pub fn height(&self) -> usize {
        self.first.height
    }
}

/// Sample depth used when writing raster files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Reads an 8- or 16-bit grayscale/RGB raster and normalizes samples to `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageFrame> {
    let path = path.as_ref();
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => ImageFrame::new(w, h, 1, buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect()),
        DynamicImage::ImageRgb8(buf) => ImageFrame::new(w, h, 3, buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect()),
        DynamicImage::ImageLuma16(buf) => ImageFrame::new(w, h, 1, buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect()),
        DynamicImage::ImageRgb16(buf) => ImageFrame::new(w, h, 3, buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect()),
        other => Err(Error::Unsupported(format!("{}: color type {:?} (only 8/16-bit gray or RGB)", path.display(), other.color()))),
    }
}

/// Writes an 8-bit raster.
pub fn write_image(frame: &ImageFrame, path: impl AsRef<Path>) -> Result<()> {
    write_image_with_depth(frame, path, BitDepth::Eight)
}

pub fn write_image_with_depth(frame: &ImageFrame, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (w, h) = (frame.width as u32, frame.height as u32);
    let img = match (depth, frame.channels) {
        (BitDepth::Eight, 1) => {
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, quantize8(&frame.data)).expect("sized buffer"))
        }
        (BitDepth::Eight, _) => {
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, quantize8(&frame.data)).expect("sized buffer"))
        }
        (BitDepth::Sixteen, 1) => {
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, quantize16(&frame.data)).expect("sized buffer"))
        }
        (BitDepth::Sixteen, _) => {
            DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, quantize16(&frame.data)).expect("sized buffer"))
        }
    };
    img.save(path.as_ref())?;
    Ok(())
}

fn quantize8(data: &[f32]) -> Vec<u8> {
    data.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

fn quantize16(data: &[f32]) -> Vec<u16> {
    data.iter().map(|v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(ImageFrame::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageFrame::new(1, 1, 1, vec![f32::NAN]).is_err());
        assert!(ImageFrame::new(2, 1, 1, vec![0.5]).is_err());
        assert!(ImageFrame::new(1, 1, 2, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn eight_bit_endpoints_normalize() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![0u8, 255]).unwrap().save(&p).unwrap();
        let f = read_image(&p).unwrap();
        assert_eq!(f.get(0, 0, 0), 0.0);
        assert_eq!(f.get(1, 0, 0), 1.0);
    }

    #[test]
    fn eight_bit_rgb_round_trip_is_pixel_identical() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.png");
        let dst = dir.path().join("dst.png");
        let raw: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as u8).collect();
        ImageBuffer::<Rgb<u8>, _>::from_raw(4, 3, raw.clone()).unwrap().save(&src).unwrap();
        write_image(&read_image(&src).unwrap(), &dst).unwrap();
        let back = image::open(&dst).unwrap().into_rgb8().into_raw();
        assert_eq!(raw, back);
    }

    #[test]
    fn sixteen_bit_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.png");
        let dst = dir.path().join("dst.png");
        let raw: Vec<u16> = (0..5 * 4).map(|i| (i * 3251 % 65536) as u16).collect();
        ImageBuffer::<Luma<u16>, _>::from_raw(5, 4, raw.clone()).unwrap().save(&src).unwrap();
        write_image_with_depth(&read_image(&src).unwrap(), &dst, BitDepth::Sixteen).unwrap();
        let back = image::open(&dst).unwrap().into_luma16().into_raw();
        assert_eq!(raw, back);
    }

    #[test]
    fn rgba_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        image::RgbaImage::new(2, 2).save(&p).unwrap();
        assert!(matches!(read_image(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn corrupt_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        std::fs::write(&p, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        assert!(read_image(&p).is_err());
    }
}
