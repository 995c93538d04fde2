//! Defect map: a per-pixel vote over directions comparing each local length
//! with the direction mean of the overall diagram.
//!
//! Direction `i` of a pixel is successful at tolerance `tau'` when
//! `|l_i - mean_i| / mean_i <= tau'`. With `c` computable directions and `s`
//! successes the map value is `2s/c - 1`, so it runs from -1 to +1 and is
//! positive exactly when the successes hold a strict majority.

use serde::{Deserialize, Serialize};

use crate::cld::{LocalCld, OverallCld};
use crate::error::{CldError, Result};

/// Bracket width at which the first-positive-step bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-9;

/// Relative deviations of the computable directions of pixel `idx`.
pub fn direction_ratios(local: &LocalCld, overall: &OverallCld, idx: usize) -> Vec<f64> {
    local
        .pixel(idx)
        .zip(&overall.lengths)
        .filter_map(|(l, mean)| {
            let (l, mean) = (f64::from(l?), (*mean)?);
            Some((l - mean).abs() / mean)
        })
        .collect()
}

#[inline]
fn successes(ratios: &[f64], tau_prime: f64) -> usize {
    ratios.iter().filter(|&&r| r <= tau_prime).count()
}

#[inline]
fn is_positive(ratios: &[f64], tau_prime: f64) -> bool {
    2 * successes(ratios, tau_prime) > ratios.len()
}

fn vote(ratios: &[f64], tau_prime: f64) -> Option<f64> {
    if ratios.is_empty() {
        return None;
    }
    let c = ratios.len() as f64;
    Some(2.0 * successes(ratios, tau_prime) as f64 / c - 1.0)
}

fn index(local: &LocalCld, x: usize, y: usize) -> usize {
    assert!(x < local.width() && y < local.height(), "pixel out of range");
    y * local.width() + x
}

pub fn psi(local: &LocalCld, overall: &OverallCld, x: usize, y: usize, tau_prime: f64) -> Option<f64> {
    vote(&direction_ratios(local, overall, index(local, x, y)), tau_prime)
}

/// Smallest tolerance at which every computable direction succeeds.
pub fn tau_prime_max_point(local: &LocalCld, overall: &OverallCld, x: usize, y: usize) -> Option<f64> {
    max_ratio(&direction_ratios(local, overall, index(local, x, y)))
}

fn max_ratio(ratios: &[f64]) -> Option<f64> {
    ratios.iter().copied().reduce(f64::max)
}

/// First tolerance at which the vote turns positive.
pub fn tau_prime_g(local: &LocalCld, overall: &OverallCld, x: usize, y: usize) -> Option<f64> {
    first_positive_step(&direction_ratios(local, overall, index(local, x, y)))
}

/// Bisection over `[0, max ratio]` followed by a snap to the smallest
/// direction ratio inside the final bracket that makes the vote positive.
/// The vote only changes at ratio values, so the snapped value is exact.
pub fn first_positive_step(ratios: &[f64]) -> Option<f64> {
    let mut hi = max_ratio(ratios)?;
    let mut lo = 0.0;
    if is_positive(ratios, lo) {
        return Some(0.0);
    }
    while hi - lo > BISECTION_TOLERANCE {
        let mid = lo + 0.5 * (hi - lo);
        if is_positive(ratios, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut inside: Vec<f64> = ratios.iter().copied().filter(|&r| r > lo && r <= hi).collect();
    inside.sort_by(f64::total_cmp);
    inside.into_iter().find(|&r| is_positive(ratios, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelClass {
    Successful,
    Defective,
    Unsupported,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectMap {
    width: usize,
    height: usize,
    tau_prime: f64,
    values: Vec<Option<f64>>,
}

impl DefectMap {
    pub fn compute(local: &LocalCld, overall: &OverallCld, tau_prime: f64) -> Self {
        let values = (0..local.pixel_count())
            .map(|idx| vote(&direction_ratios(local, overall, idx), tau_prime))
            .collect();
        Self {
            width: local.width(),
            height: local.height(),
            tau_prime,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tau_prime(&self) -> f64 {
        self.tau_prime
    }

    pub fn psi(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    pub fn class(&self, x: usize, y: usize) -> PixelClass {
        classify(self.psi(x, y))
    }

    pub fn classes(&self) -> impl Iterator<Item = PixelClass> + '_ {
        self.values.iter().map(|&v| classify(v))
    }

    pub fn successful_fraction(&self) -> f64 {
        let n = self
            .classes()
            .filter(|&c| c == PixelClass::Successful)
            .count();
        n as f64 / self.values.len() as f64
    }
}

fn classify(v: Option<f64>) -> PixelClass {
    match v {
        None => PixelClass::Unsupported,
        Some(p) if p > 0.0 => PixelClass::Successful,
        Some(_) => PixelClass::Defective,
    }
}

/// Per-pixel thresholds of the defect map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessProfile {
    pub width: usize,
    pub height: usize,
    pub tau_prime_g: Vec<Option<f64>>,
    pub tau_prime_max_pt: Vec<Option<f64>>,
    pub tau_prime_max: f64,
}

impl SuccessProfile {
    pub fn compute(local: &LocalCld, overall: &OverallCld) -> Self {
        let n = local.pixel_count();
        let mut tau_prime_g = Vec::with_capacity(n);
        let mut tau_prime_max_pt = Vec::with_capacity(n);
        for idx in 0..n {
            let ratios = direction_ratios(local, overall, idx);
            tau_prime_g.push(first_positive_step(&ratios));
            tau_prime_max_pt.push(max_ratio(&ratios));
        }
        let tau_prime_max = tau_prime_max_pt.iter().flatten().copied().fold(0.0, f64::max);
        Self {
            width: local.width(),
            height: local.height(),
            tau_prime_g,
            tau_prime_max_pt,
            tau_prime_max,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Number of pixels that are successful at `tau_prime`.
    pub fn chi_count(&self, tau_prime: f64) -> usize {
        self.tau_prime_g
            .iter()
            .flatten()
            .filter(|&&g| g <= tau_prime)
            .count()
    }

    /// Successful fraction of the image at `tau_prime`.
    pub fn chi(&self, tau_prime: f64) -> f64 {
        self.chi_count(tau_prime) as f64 / self.pixel_count() as f64
    }

    pub fn supported_count(&self) -> usize {
        self.tau_prime_g.iter().flatten().count()
    }

    fn sorted_steps(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.tau_prime_g.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessEntry {
    pub alpha: f64,
    pub tau_prime: Option<f64>,
    pub reachable: bool,
}

/// Coverage-to-tolerance table: row `j` holds the smallest tolerance whose
/// successful fraction reaches `j / k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub k: usize,
    pub entries: Vec<SuccessEntry>,
    pub attainable_max: f64,
}

impl SuccessTable {
    pub fn build(profile: &SuccessProfile, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(CldError::InvalidParameter("k must be at least 1".into()));
        }
        let steps = profile.sorted_steps();
        if steps.is_empty() {
            return Err(CldError::EmptyTable);
        }
        let total = profile.pixel_count();
        let entries = (0..=k)
            .map(|j| {
                // ceil(j * hw / k) pixels are needed to reach j / k.
                let required = (j * total).div_ceil(k);
                let tau_prime = match required {
                    0 => Some(0.0),
                    r => steps.get(r - 1).copied(),
                };
                SuccessEntry {
                    alpha: j as f64 / k as f64,
                    tau_prime,
                    reachable: tau_prime.is_some(),
                }
            })
            .collect();
        Ok(Self {
            k,
            entries,
            attainable_max: steps.len() as f64 / total as f64,
        })
    }

    /// Tolerance of the first row whose coverage is at least `percent`.
    pub fn resolve_coverage(&self, percent: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&percent) {
            return Err(CldError::InvalidParameter(format!(
                "coverage must be within [0, 100], got {percent}"
            )));
        }
        let k = self.k as f64;
        let row = (0..=self.k)
            .find(|&j| j as f64 * 100.0 >= percent * k)
            .expect("row k covers 100%");
        self.entries[row]
            .tau_prime
            .ok_or(CldError::UnreachableCoverage {
                requested: percent,
                attainable: self.attainable_max * 100.0,
            })
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["alpha", "tau_prime", "reachable"])?;
        for e in &self.entries {
            wtr.write_record([
                e.alpha.to_string(),
                e.tau_prime.map_or_else(String::new, |t| t.to_string()),
                e.reachable.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
