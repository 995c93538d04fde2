//! Deterministic synthetic textures for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CldError, Result};
use crate::image::GrayImage;

const LOW: u8 = 0;
const HIGH: u8 = 255;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticSpec {
    /// Alternating 0/255 square cells.
    Checkerboard {
        width: usize,
        height: usize,
        cell: usize,
    },
    /// Checkerboard of `left_cell` on the left half, `right_cell` on the
    /// right half.
    TwoTextureComposite {
        width: usize,
        height: usize,
        left_cell: usize,
        right_cell: usize,
    },
    Constant {
        width: usize,
        height: usize,
        value: u8,
    },
    /// Independent uniform bytes.
    UniformNoise {
        width: usize,
        height: usize,
        seed: u64,
    },
    /// Checkerboard with the dark cell at cell coordinates
    /// (`cell_x`, `cell_y`) painted bright.
    MissingCell {
        width: usize,
        height: usize,
        cell: usize,
        cell_x: usize,
        cell_y: usize,
    },
    /// Uniform noise box-filtered over a `(2 radius + 1)` window and
    /// stretched back to the full byte range: a grainy natural-looking
    /// texture.
    SmoothNoise {
        width: usize,
        height: usize,
        radius: usize,
        seed: u64,
    },
}

impl SyntheticSpec {
    pub fn dimensions(&self) -> (usize, usize) {
        match *self {
            SyntheticSpec::Checkerboard { width, height, .. }
            | SyntheticSpec::TwoTextureComposite { width, height, .. }
            | SyntheticSpec::Constant { width, height, .. }
            | SyntheticSpec::UniformNoise { width, height, .. }
            | SyntheticSpec::MissingCell { width, height, .. }
            | SyntheticSpec::SmoothNoise { width, height, .. } => (width, height),
        }
    }

    pub fn generate(&self) -> Result<GrayImage> {
        let (w, h) = self.dimensions();
        if w == 0 || h == 0 {
            return Err(CldError::Dimension {
                width: w as u32,
                height: h as u32,
            });
        }
        match *self {
            SyntheticSpec::Checkerboard { cell, .. } => {
                let cell = positive_cell(cell)?;
                GrayImage::from_fn(w, h, |x, y| checker(x, y, cell))
            }
            SyntheticSpec::TwoTextureComposite {
                left_cell,
                right_cell,
                ..
            } => {
                let (l, r) = (positive_cell(left_cell)?, positive_cell(right_cell)?);
                GrayImage::from_fn(w, h, |x, y| {
                    checker(x, y, if x < w / 2 { l } else { r })
                })
            }
            SyntheticSpec::Constant { value, .. } => GrayImage::new(w, h, vec![value; w * h]),
            SyntheticSpec::UniformNoise { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect())
            }
            SyntheticSpec::MissingCell {
                cell,
                cell_x,
                cell_y,
                ..
            } => {
                let cell = positive_cell(cell)?;
                if checker(cell_x * cell, cell_y * cell, cell) != LOW {
                    return Err(CldError::InvalidParameter(format!(
                        "cell ({cell_x}, {cell_y}) is not a dark cell"
                    )));
                }
                GrayImage::from_fn(w, h, |x, y| {
                    if x / cell == cell_x && y / cell == cell_y {
                        HIGH
                    } else {
                        checker(x, y, cell)
                    }
                })
            }
            SyntheticSpec::SmoothNoise { radius, seed, .. } => smooth_noise(w, h, radius, seed),
        }
    }
}

fn positive_cell(cell: usize) -> Result<usize> {
    if cell == 0 {
        Err(CldError::InvalidParameter("cell size must be positive".into()))
    } else {
        Ok(cell)
    }
}

fn checker(x: usize, y: usize, cell: usize) -> u8 {
    if (x / cell + y / cell) % 2 == 0 {
        LOW
    } else {
        HIGH
    }
}

fn smooth_noise(w: usize, h: usize, radius: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..w * h).map(|_| rng.gen::<f64>()).collect();
    let r = radius as isize;
    let mut blurred = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sum, mut n) = (0.0, 0usize);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (px, py) = (x + dx, y + dy);
                    if px >= 0 && py >= 0 && px < w as isize && py < h as isize {
                        sum += raw[py as usize * w + px as usize];
                        n += 1;
                    }
                }
            }
            blurred[y as usize * w + x as usize] = sum / n as f64;
        }
    }
    let lo = blurred.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = blurred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels = blurred
        .iter()
        .map(|&v| (16.0 + 223.0 * (v - lo) / span).round() as u8)
        .collect();
    GrayImage::new(w, h, pixels)
}
