//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use cldmap::{GrayImage, LocalCld, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N_DIRS: usize = 32;

pub fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Keep the mean away from zero.
    GrayImage::new(w, h, (0..w * h).map(|_| rng.gen_range(1..=255)).collect()).unwrap()
}

pub fn checkerboard(n: usize, cell: usize) -> GrayImage {
    SyntheticSpec::Checkerboard { width: n, height: n, cell }.generate().unwrap()
}

pub fn mean_brightness(img: &GrayImage) -> f64 {
    img.pixels().iter().map(|&p| p as f64).sum::<f64>() / img.len() as f64
}

/// Re-walks the ray from scratch for every candidate sample count.
pub fn naive_length(img: &GrayImage, x: usize, y: usize, dir: usize, tau: f64) -> Option<u32> {
    let m0 = mean_brightness(img);
    let theta = dir as f64 * std::f64::consts::TAU / N_DIRS as f64;
    let (w, h) = (img.width() as isize, img.height() as isize);
    for n in 1usize.. {
        let mut sum = 0u64;
        for k in 0..n {
            let px = x as isize + (k as f64 * theta.cos()).round() as isize;
            let py = y as isize - (k as f64 * theta.sin()).round() as isize;
            if px < 0 || py < 0 || px >= w || py >= h {
                return None;
            }
            sum += img.get(px as usize, py as usize) as u64;
        }
        let mean = sum as f64 / n as f64;
        if (mean - m0).abs() / m0 <= tau {
            return Some(n as u32);
        }
    }
    unreachable!()
}

pub fn naive_local(img: &GrayImage, tau: f64) -> Vec<u32> {
    let mut out = Vec::with_capacity(img.len() * N_DIRS);
    for y in 0..img.height() {
        for x in 0..img.width() {
            for i in 0..N_DIRS {
                out.push(naive_length(img, x, y, i, tau).unwrap_or(0));
            }
        }
    }
    out
}

/// Direction means straight from the flat length array.
pub fn direction_means(local: &LocalCld) -> Vec<Option<f64>> {
    let raw = local.to_raw();
    (0..N_DIRS)
        .map(|i| {
            let vals: Vec<u32> = raw.iter().skip(i).step_by(N_DIRS).copied().filter(|&l| l > 0).collect();
            (!vals.is_empty()).then(|| vals.iter().map(|&v| v as u64).sum::<u64>() as f64 / vals.len() as f64)
        })
        .collect()
}

pub fn pixel_ratios(local: &LocalCld, means: &[Option<f64>], idx: usize) -> Vec<f64> {
    let raw = local.to_raw();
    (0..N_DIRS)
        .filter_map(|i| {
            let l = raw[idx * N_DIRS + i];
            let m = means[i]?;
            (l > 0).then(|| (l as f64 - m).abs() / m)
        })
        .collect()
}

/// First positive step of the vote as an order statistic: the vote
/// `2s/c - 1` is positive once `s > c/2`.
pub fn order_statistic_step(ratios: &[f64]) -> Option<f64> {
    if ratios.is_empty() {
        return None;
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[ratios.len() / 2])
}

/// Mean-square relative mismatch per pixel.
pub fn naive_q(local: &LocalCld, means: &[Option<f64>], idx: usize) -> Option<f64> {
    let raw = local.to_raw();
    let terms: Vec<f64> = (0..N_DIRS)
        .filter_map(|i| {
            let l = raw[idx * N_DIRS + i];
            let m = means[i]?;
            (l > 0).then(|| ((l as f64 - m) / m).powi(2))
        })
        .collect();
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Defective count in the `q > (1 + tau'') <q>` form.
pub fn count_defective(q: &[Option<f64>], tau_dd: f64) -> usize {
    let defined: Vec<f64> = q.iter().flatten().copied().collect();
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    defined.iter().filter(|&&v| v > (1.0 + tau_dd) * mean).count()
}

/// Images whose overall mean length never grows with the saturation
/// threshold (checked over a 64-point grid).
pub fn b_omega_corpus() -> Vec<(String, GrayImage)> {
    let mut v = vec![("checkerboard-1".to_string(), checkerboard(32, 1))];
    for (radius, seed) in [(1, 0), (1, 1), (1, 2), (3, 0), (3, 1), (3, 2)] {
        v.push((
            format!("smooth-noise-r{radius}-s{seed}"),
            SyntheticSpec::SmoothNoise { width: 32, height: 32, radius, seed }.generate().unwrap(),
        ));
    }
    for seed in 0..3 {
        v.push((
            format!("uniform-noise-s{seed}"),
            SyntheticSpec::UniformNoise { width: 32, height: 32, seed }.generate().unwrap(),
        ));
    }
    v
}
