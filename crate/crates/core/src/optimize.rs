//! Choice of the saturation threshold.
//!
//! Two quality indexes are tracked as functions of `tau`: the mean length of
//! the overall diagram (`omega`, shrinks as `tau` grows on well-behaved
//! textures) and the mean support fraction (`Omega`, grows with `tau`).
//! Their product, each shifted by its minimum over the grid, peaks at an
//! interior threshold that keeps both "good enough".

use serde::{Deserialize, Serialize};

use crate::cld::{CldAnalysis, OverallCld, SupportMap, DIRECTIONS};
use crate::error::{CldError, Result};
use crate::image::{GrayImage, ImageStats};

pub const DEFAULT_GRID: usize = 64;
pub const MIN_GRID: usize = 8;
/// Golden-section bracket tolerance, relative to `tau_max`.
pub const REFINE_TOLERANCE: f64 = 1e-4;

/// Mean of the 32 direction lengths; empty directions count as zero.
pub fn mean_length(overall: &OverallCld) -> Result<f64> {
    if overall.lengths.iter().all(Option::is_none) {
        return Err(CldError::NoSupport);
    }
    Ok(mean_length_or_zero(overall))
}

fn mean_length_or_zero(overall: &OverallCld) -> f64 {
    overall.lengths.iter().flatten().sum::<f64>() / DIRECTIONS as f64
}

/// Mean of the support map over the whole image, in `[0, 1]`.
pub fn support_fraction(smap: &SupportMap) -> f64 {
    let total: u64 = smap.counts().iter().map(|&c| u64::from(c)).sum();
    total as f64 / (DIRECTIONS as f64 * smap.counts().len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityPoint {
    pub tau: f64,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub support: f64,
    #[serde(rename = "Pi")]
    pub quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityCurve {
    pub points: Vec<QualityPoint>,
    pub omega_min: f64,
    #[serde(rename = "Omega_min")]
    pub support_min: f64,
}

impl QualityCurve {
    /// Builds the shifted product from per-grid `omega` and `Omega` values.
    pub fn from_values(taus: &[f64], omegas: &[f64], supports: &[f64]) -> Result<Self> {
        if taus.is_empty() || taus.len() != omegas.len() || taus.len() != supports.len() {
            return Err(CldError::InvalidParameter(
                "quality grid must be nonempty with matching lengths".into(),
            ));
        }
        let omega_min = omegas.iter().copied().fold(f64::INFINITY, f64::min);
        let support_min = supports.iter().copied().fold(f64::INFINITY, f64::min);
        let points = taus
            .iter()
            .zip(omegas)
            .zip(supports)
            .map(|((&tau, &omega), &support)| QualityPoint {
                tau,
                omega,
                support,
                quality: (support - support_min) * (omega - omega_min),
            })
            .collect();
        Ok(Self {
            points,
            omega_min,
            support_min,
        })
    }

    pub fn quality_at(&self, omega: f64, support: f64) -> f64 {
        (support - self.support_min) * (omega - self.omega_min)
    }

    /// Index of the largest product, ties broken toward smaller `tau`.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (g, p) in self.points.iter().enumerate() {
            if p.quality > self.points[best].quality {
                best = g;
            }
        }
        best
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["tau", "omega", "Omega", "Pi"])?;
        for p in &self.points {
            wtr.write_record([
                p.tau.to_string(),
                p.omega.to_string(),
                p.support.to_string(),
                p.quality.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub tau0: f64,
    pub pi_at_tau0: f64,
    pub curve: QualityCurve,
}

/// Uniform grid of `n` thresholds over `(0, tau_max]`.
pub fn tau_grid(tau_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|g| tau_max * g as f64 / n as f64).collect()
}

/// `omega` and `Omega` at one threshold.
pub fn quality_indexes(img: &GrayImage, stats: &ImageStats, tau: f64) -> Result<(f64, f64)> {
    let a = CldAnalysis::compute(img, stats, tau)?;
    Ok((mean_length_or_zero(&a.overall), support_fraction(&a.support)))
}

pub fn quality_curve(img: &GrayImage, stats: &ImageStats, grid_size: usize) -> Result<QualityCurve> {
    let taus = tau_grid(stats.tau_max, grid_size);
    let mut omegas = Vec::with_capacity(grid_size);
    let mut supports = Vec::with_capacity(grid_size);
    for &tau in &taus {
        let (omega, support) = quality_indexes(img, stats, tau)?;
        omegas.push(omega);
        supports.push(support);
    }
    QualityCurve::from_values(&taus, &omegas, &supports)
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// Returns the best probe seen, not the final bracket midpoint; `f` may be
/// piecewise constant. Ties keep the smaller abscissa.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx > best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            consider(d, fd, &mut best);
        }
    }
    Ok(best)
}

/// Finds the saturation threshold maximizing the shifted quality product.
///
/// The grid maximum is refined by golden-section search between its two
/// grid neighbours; the refined point is kept only when it is at least as
/// good as every grid point.
pub fn optimize_tau(img: &GrayImage, stats: &ImageStats, grid_size: usize) -> Result<OptimizationResult> {
    if grid_size < MIN_GRID {
        return Err(CldError::InvalidParameter(format!(
            "grid size must be at least {MIN_GRID}, got {grid_size}"
        )));
    }
    if stats.tau_max <= 0.0 {
        return Err(CldError::DegenerateImage(
            "constant image: tau_max is zero, nothing to optimize",
        ));
    }
    let curve = quality_curve(img, stats, grid_size)?;
    let g = curve.argmax();
    let grid_best = curve.points[g];
    if grid_best.quality <= 0.0 {
        return Err(CldError::DegenerateCurve {
            fallback_tau: stats.tau_max / 2.0,
        });
    }

    let lo = if g == 0 { 0.0 } else { curve.points[g - 1].tau };
    let hi = curve.points[(g + 1).min(curve.points.len() - 1)].tau;
    let (x, fx) = golden_section_max(
        |tau| {
            let (omega, support) = quality_indexes(img, stats, tau)?;
            Ok(curve.quality_at(omega, support))
        },
        lo,
        hi,
        REFINE_TOLERANCE * stats.tau_max,
    )?;

    let (tau0, pi_at_tau0) =
        if fx > grid_best.quality || (fx == grid_best.quality && x < grid_best.tau) {
            (x, fx)
        } else {
            (grid_best.tau, grid_best.quality)
        };
    Ok(OptimizationResult {
        tau0,
        pi_at_tau0,
        curve,
    })
}
