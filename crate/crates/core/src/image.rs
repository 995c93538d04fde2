//! Grayscale images and the global brightness statistics every map is
//! built against.

use std::path::Path;

use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{CldError, Result};

/// Row-major 8-bit brightness grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CldError::Dimension {
                width: width as u32,
                height: height as u32,
            });
        }
        if pixels.len() != width * height {
            return Err(CldError::BufferSize {
                width: width as u32,
                height: height as u32,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Converts interleaved RGB bytes with BT.601 luma weights, rounded to
    /// the nearest integer.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(CldError::BufferSize {
                width: width as u32,
                height: height as u32,
                len: rgb.len(),
            });
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn from_dynamic(img: &DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(gray) => Self::new(w, h, gray.as_raw().clone()),
            other => {
                let rgb = other.to_rgb8();
                Self::from_rgb(w, h, rgb.as_raw())
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|source| CldError::Decode {
            path: "<memory>".into(),
            source,
        })?;
        Self::from_dynamic(&img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("dimensions checked at construction")
    }

    pub fn to_rgb8(&self) -> RgbImage {
        DynamicImage::ImageLuma8(self.to_luma8()).to_rgb8()
    }
}

/// ITU-R BT.601 luma, rounded half away from zero.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Loads a BMP, JPEG or PNG file as a grayscale image.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| CldError::Decode {
            path: path.to_path_buf(),
            source: image::ImageError::IoError(e),
        })?
        .with_guessed_format()
        .map_err(|e| CldError::Decode {
            path: path.to_path_buf(),
            source: image::ImageError::IoError(e),
        })?
        .decode()
        .map_err(|source| CldError::Decode {
            path: path.to_path_buf(),
            source,
        })?;
    GrayImage::from_dynamic(&img)
}

/// Global brightness statistics: the mean `M0`, the largest absolute
/// deviation from it, and the largest meaningful saturation threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub mean_brightness: f64,
    pub max_abs_deviation: f64,
    pub tau_max: f64,
}

impl ImageStats {
    /// Relative deviation `|value - M0| / M0`.
    ///
    /// Every saturation test in the crate goes through this ratio, so a
    /// single pixel at the extreme deviation compares equal to `tau_max`.
    #[inline]
    pub fn relative_deviation(&self, value: f64) -> f64 {
        (value - self.mean_brightness).abs() / self.mean_brightness
    }
}

pub fn stats(img: &GrayImage) -> Result<ImageStats> {
    let sum: u64 = img.pixels.iter().map(|&p| u64::from(p)).sum();
    if sum == 0 {
        return Err(CldError::DegenerateImage(
            "mean brightness is zero; tau_max is undefined",
        ));
    }
    let mean = sum as f64 / img.len() as f64;
    let (lo, hi) = img
        .pixels
        .iter()
        .fold((u8::MAX, u8::MIN), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let max_abs_deviation = (f64::from(lo) - mean)
        .abs()
        .max((f64::from(hi) - mean).abs());
    Ok(ImageStats {
        mean_brightness: mean,
        max_abs_deviation,
        tau_max: max_abs_deviation / mean,
    })
}
