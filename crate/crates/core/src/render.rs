//! Map rendering and deterministic image encoding.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Pixel, PixelWithColorType, Rgb, RgbImage};

use crate::cld::SupportMap;
use crate::ddmap::DirectionalDefectMap;
use crate::dmap::{DefectMap, PixelClass};
use crate::error::Result;

pub const GREEN: Rgb<u8> = Rgb([0, 255, 0]);
pub const RED: Rgb<u8> = Rgb([255, 0, 0]);
pub const YELLOW: Rgb<u8> = Rgb([255, 255, 0]);
pub const BLACK: Rgb<u8> = Rgb([0, 0, 0]);

/// Support fraction as gray levels, 1 -> white.
pub fn render_smap(smap: &SupportMap) -> image::GrayImage {
    let pixels = smap
        .values()
        .map(|phi| (phi * 255.0).round() as u8)
        .collect();
    image::GrayImage::from_raw(smap.width() as u32, smap.height() as u32, pixels)
        .expect("support map dimensions")
}

/// Successful pixels green, defective red, unsupported black.
pub fn render_dmap(map: &DefectMap) -> RgbImage {
    RgbImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        match map.class(x as usize, y as usize) {
            PixelClass::Successful => GREEN,
            PixelClass::Defective => RED,
            PixelClass::Unsupported => BLACK,
        }
    })
}

/// Non-defective pixels yellow, defective red, unsupported black.
pub fn render_ddmap(ddmap: &DirectionalDefectMap, tau_doubleprime: f64) -> RgbImage {
    RgbImage::from_fn(ddmap.width as u32, ddmap.height as u32, |x, y| {
        let idx = y as usize * ddmap.width + x as usize;
        if ddmap.q[idx].is_none() {
            BLACK
        } else if ddmap.is_defective(idx, tau_doubleprime) {
            RED
        } else {
            YELLOW
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MapFormat {
    #[default]
    Png,
    Bmp,
}

impl MapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MapFormat::Png => "png",
            MapFormat::Bmp => "bmp",
        }
    }

    fn image_format(self) -> ImageFormat {
        match self {
            MapFormat::Png => ImageFormat::Png,
            MapFormat::Bmp => ImageFormat::Bmp,
        }
    }
}

pub fn encode<P>(img: &ImageBuffer<P, Vec<u8>>, format: MapFormat) -> Result<Vec<u8>>
where
    P: Pixel<Subpixel = u8> + PixelWithColorType,
{
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, format.image_format())?;
    Ok(buf.into_inner())
}

pub fn save<P>(img: &ImageBuffer<P, Vec<u8>>, path: impl AsRef<Path>, format: MapFormat) -> Result<()>
where
    P: Pixel<Subpixel = u8> + PixelWithColorType,
{
    std::fs::write(path, encode(img, format)?)?;
    Ok(())
}
