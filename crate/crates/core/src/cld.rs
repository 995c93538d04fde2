//! Directional coherence lengths, the overall coherence length diagram and
//! the support map.
//!
//! A coherence length is measured along a discrete ray leaving a pixel in
//! one of 32 evenly spaced directions. Sample `k` of the ray sits at
//! `(x + round(k cos θ), y - round(k sin θ))`, the start pixel included, and
//! the length is the first sample count `n` whose running brightness mean
//! lies inside the band `|mean - M0| / M0 <= tau`. When the ray leaves the
//! image first, the length is absent.

use std::f64::consts::PI;
use std::num::NonZeroU32;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CldError, Result};
use crate::image::{GrayImage, ImageStats};

pub const DIRECTIONS: usize = 32;

/// Angle of direction `i` (0-based) in radians.
#[inline]
pub fn direction_angle(i: usize) -> f64 {
    i as f64 * (2.0 * PI / DIRECTIONS as f64)
}

/// Pixel offset of ray sample `k` in direction `i`, with the image y-axis
/// pointing down.
#[inline]
pub fn ray_offset(i: usize, k: usize) -> (isize, isize) {
    let theta = direction_angle(i);
    let k = k as f64;
    (
        (k * theta.cos()).round() as isize,
        -(k * theta.sin()).round() as isize,
    )
}

/// The 32 standard directions, with their ray offsets tabulated far enough
/// that any ray has left an image of the given size before the table ends.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    offsets: Vec<Vec<(isize, isize)>>,
}

impl DirectionSet {
    pub fn for_image(width: usize, height: usize) -> Self {
        // The dominant axis advances at least cos(45°) per sample.
        let steps = width.max(height) * 3 / 2 + 3;
        let offsets = (0..DIRECTIONS)
            .map(|i| (0..steps).map(|k| ray_offset(i, k)).collect())
            .collect();
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        DIRECTIONS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> {
        (0..DIRECTIONS).map(direction_angle)
    }

    pub fn ray(&self, i: usize) -> &[(isize, isize)] {
        &self.offsets[i]
    }
}

#[inline]
fn saturated(stats: &ImageStats, sum: u64, n: u64, tau: f64) -> bool {
    stats.relative_deviation(sum as f64 / n as f64) <= tau
}

#[inline]
fn walk(
    img: &GrayImage,
    stats: &ImageStats,
    ray: &[(isize, isize)],
    x: usize,
    y: usize,
    tau: f64,
) -> Option<NonZeroU32> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut sum = 0u64;
    for (k, &(dx, dy)) in ray.iter().enumerate() {
        let (px, py) = (x as isize + dx, y as isize + dy);
        if px < 0 || py < 0 || px >= w || py >= h {
            return None;
        }
        sum += u64::from(img.get(px as usize, py as usize));
        let n = k as u64 + 1;
        if saturated(stats, sum, n, tau) {
            return NonZeroU32::new(n as u32);
        }
    }
    None
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(CldError::InvalidTau(tau))
    }
}

/// Coherence length at one pixel in direction `i` (0-based).
pub fn coherence_length(
    img: &GrayImage,
    stats: &ImageStats,
    x: usize,
    y: usize,
    i: usize,
    tau: f64,
) -> Result<Option<u32>> {
    check_tau(tau)?;
    if x >= img.width() || y >= img.height() || i >= DIRECTIONS {
        return Err(CldError::InvalidParameter(format!(
            "pixel ({x}, {y}) direction {i} outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let dirs = DirectionSet::for_image(img.width(), img.height());
    Ok(walk(img, stats, dirs.ray(i), x, y, tau).map(NonZeroU32::get))
}

/// Per-pixel coherence lengths in all 32 directions.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCld {
    width: usize,
    height: usize,
    tau: f64,
    lengths: Vec<Option<NonZeroU32>>,
}

impl LocalCld {
    pub fn compute(img: &GrayImage, stats: &ImageStats, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let (w, h) = (img.width(), img.height());
        let dirs = DirectionSet::for_image(w, h);
        let mut lengths = vec![None; w * h * DIRECTIONS];
        lengths
            .par_chunks_mut(w * DIRECTIONS)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, cell) in row.chunks_exact_mut(DIRECTIONS).enumerate() {
                    for (i, slot) in cell.iter_mut().enumerate() {
                        *slot = walk(img, stats, dirs.ray(i), x, y, tau);
                    }
                }
            });
        Ok(Self {
            width: w,
            height: h,
            tau,
            lengths,
        })
    }

    /// Builds a local diagram from explicit lengths, laid out pixel-major
    /// with 32 consecutive directions per pixel; zero marks an absent length.
    pub fn from_lengths(width: usize, height: usize, tau: f64, raw: &[u32]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CldError::Dimension {
                width: width as u32,
                height: height as u32,
            });
        }
        if raw.len() != width * height * DIRECTIONS {
            return Err(CldError::InvalidParameter(format!(
                "expected {} lengths, got {}",
                width * height * DIRECTIONS,
                raw.len()
            )));
        }
        Ok(Self {
            width,
            height,
            tau,
            lengths: raw.iter().map(|&l| NonZeroU32::new(l)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, i: usize) -> Option<u32> {
        self.lengths[(y * self.width + x) * DIRECTIONS + i].map(NonZeroU32::get)
    }

    /// The 32 lengths of pixel `idx` (row-major index).
    #[inline]
    pub fn pixel(&self, idx: usize) -> impl Iterator<Item = Option<u32>> + '_ {
        self.lengths[idx * DIRECTIONS..(idx + 1) * DIRECTIONS]
            .iter()
            .map(|l| l.map(NonZeroU32::get))
    }

    /// Flat copy in the `from_lengths` layout.
    pub fn to_raw(&self) -> Vec<u32> {
        self.lengths
            .iter()
            .map(|l| l.map_or(0, NonZeroU32::get))
            .collect()
    }
}

/// Direction-averaged lengths: the polar coherence length diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallCld {
    pub tau: f64,
    pub lengths: Vec<Option<f64>>,
    pub support_counts: Vec<usize>,
}

impl OverallCld {
    pub fn from_local(local: &LocalCld) -> Self {
        let mut sums = [0u64; DIRECTIONS];
        let mut counts = [0usize; DIRECTIONS];
        for idx in 0..local.pixel_count() {
            for (i, l) in local.pixel(idx).enumerate() {
                if let Some(l) = l {
                    sums[i] += u64::from(l);
                    counts[i] += 1;
                }
            }
        }
        let lengths = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| (c > 0).then(|| s as f64 / c as f64))
            .collect();
        Self {
            tau: local.tau,
            lengths,
            support_counts: counts.to_vec(),
        }
    }

    #[inline]
    pub fn mean(&self, i: usize) -> Option<f64> {
        self.lengths[i]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["direction_index", "angle_deg", "mean_length", "support_count"])?;
        for i in 0..DIRECTIONS {
            wtr.write_record([
                (i + 1).to_string(),
                (direction_angle(i).to_degrees()).to_string(),
                self.lengths[i].map_or_else(String::new, |l| l.to_string()),
                self.support_counts[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fraction of the 32 directions in which each pixel is computable.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMap {
    width: usize,
    height: usize,
    counts: Vec<u8>,
}

impl SupportMap {
    pub fn from_local(local: &LocalCld) -> Self {
        let counts = (0..local.pixel_count())
            .map(|idx| local.pixel(idx).filter(Option::is_some).count() as u8)
            .collect();
        Self {
            width: local.width,
            height: local.height,
            counts,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn phi(&self, x: usize, y: usize) -> f64 {
        f64::from(self.counts[y * self.width + x]) / DIRECTIONS as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts
            .iter()
            .map(|&c| f64::from(c) / DIRECTIONS as f64)
    }

    /// Number of computable directions per pixel, row-major.
    pub fn counts(&self) -> &[u8] {
        &self.counts
    }
}

/// Local diagram, overall diagram and support map at one threshold.
#[derive(Clone, Debug)]
pub struct CldAnalysis {
    pub local: LocalCld,
    pub overall: OverallCld,
    pub support: SupportMap,
}

impl CldAnalysis {
    pub fn compute(img: &GrayImage, stats: &ImageStats, tau: f64) -> Result<Self> {
        let local = LocalCld::compute(img, stats, tau)?;
        let overall = OverallCld::from_local(&local);
        let support = SupportMap::from_local(&local);
        Ok(Self {
            local,
            overall,
            support,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::stats;

    fn checkerboard(n: usize) -> GrayImage {
        GrayImage::from_fn(n, n, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 }).unwrap()
    }

    #[test]
    fn angles_evenly_spaced() {
        let dirs = DirectionSet::for_image(4, 4);
        let a: Vec<f64> = dirs.angles().collect();
        assert_eq!(a.len(), 32);
        assert_eq!(a[0], 0.0);
        for pair in a.windows(2) {
            assert!((pair[1] - pair[0] - 2.0 * PI / 32.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cardinal_offsets() {
        assert_eq!(ray_offset(0, 3), (3, 0));
        assert_eq!(ray_offset(8, 3), (0, -3));
        assert_eq!(ray_offset(16, 3), (-3, 0));
        assert_eq!(ray_offset(24, 3), (0, 3));
        assert_eq!(ray_offset(4, 2), (1, -1));
    }

    #[test]
    fn constant_image_has_unit_lengths() {
        let img = GrayImage::new(5, 4, vec![90; 20]).unwrap();
        let s = stats(&img).unwrap();
        let local = LocalCld::compute(&img, &s, 0.1).unwrap();
        assert!(local.to_raw().iter().all(|&l| l == 1));
        let overall = OverallCld::from_local(&local);
        assert!(overall.lengths.iter().all(|&l| l == Some(1.0)));
        assert!(overall.support_counts.iter().all(|&c| c == 20));
    }

    #[test]
    fn checkerboard_ray_walks() {
        let img = checkerboard(8);
        let s = stats(&img).unwrap();
        assert_eq!(coherence_length(&img, &s, 0, 0, 0, 0.1).unwrap(), Some(2));
        assert_eq!(coherence_length(&img, &s, 7, 0, 0, 0.1).unwrap(), None);
    }

    #[test]
    fn non_positive_tau_rejected() {
        let img = checkerboard(4);
        let s = stats(&img).unwrap();
        assert!(LocalCld::compute(&img, &s, 0.0).is_err());
        assert!(LocalCld::compute(&img, &s, -1.0).is_err());
    }

    #[test]
    fn overall_mean_and_empty_direction() {
        // 3 pixels; direction 0 has lengths {2,2,4}, every other direction empty.
        let mut raw = vec![0u32; 3 * DIRECTIONS];
        raw[0] = 2;
        raw[DIRECTIONS] = 2;
        raw[2 * DIRECTIONS] = 4;
        let local = LocalCld::from_lengths(3, 1, 0.1, &raw).unwrap();
        let overall = OverallCld::from_local(&local);
        assert_eq!(overall.lengths[0], Some(8.0 / 3.0));
        assert_eq!(overall.support_counts[0], 3);
        assert_eq!(overall.lengths[1], None);
        assert_eq!(overall.support_counts[1], 0);
    }

    #[test]
    fn support_fractions() {
        let mut raw = vec![0u32; 3 * DIRECTIONS];
        raw[..DIRECTIONS].fill(1);
        raw[2 * DIRECTIONS..2 * DIRECTIONS + 8].fill(3);
        let local = LocalCld::from_lengths(3, 1, 0.1, &raw).unwrap();
        let smap = SupportMap::from_local(&local);
        assert_eq!(smap.phi(0, 0), 1.0);
        assert_eq!(smap.phi(1, 0), 0.0);
        assert_eq!(smap.phi(2, 0), 0.25);
    }

    #[test]
    fn csv_has_header_and_32_rows() {
        let img = checkerboard(8);
        let s = stats(&img).unwrap();
        let a = CldAnalysis::compute(&img, &s, 0.5).unwrap();
        let mut buf = Vec::new();
        a.overall.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 33);
        assert!(text.starts_with("direction_index,angle_deg,mean_length,support_count"));
    }
}
