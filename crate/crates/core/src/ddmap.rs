//! Directional defect map: how far the shape of each local diagram strays
//! from the overall diagram.
//!
//! The mismatch of a pixel is the mean squared relative difference between
//! its computable lengths and the direction means. A pixel is defective at
//! threshold `tau''` when its mismatch exceeds `(1 + tau'')` times the image
//! mean mismatch; the test is evaluated on the excess ratio
//! `(q - mean) / mean > tau''`, which is the same condition for a positive
//! mean and makes the exhaustion threshold an exact bound.

use serde::{Deserialize, Serialize};

use crate::cld::{LocalCld, OverallCld};
use crate::error::{CldError, Result};

pub const BISECTION_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_K: usize = 10;

/// Mean squared relative length difference over the computable directions.
pub fn q_tilde(local: &LocalCld, overall: &OverallCld, x: usize, y: usize) -> Option<f64> {
    assert!(x < local.width() && y < local.height(), "pixel out of range");
    mismatch(local, overall, y * local.width() + x)
}

fn mismatch(local: &LocalCld, overall: &OverallCld, idx: usize) -> Option<f64> {
    let (sum, count) = local
        .pixel(idx)
        .zip(&overall.lengths)
        .filter_map(|(l, mean)| {
            let (l, mean) = (f64::from(l?), (*mean)?);
            let d = (l - mean) / mean;
            Some(d * d)
        })
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDefectMap {
    pub width: usize,
    pub height: usize,
    pub q: Vec<Option<f64>>,
    pub mean_q: f64,
}

impl DirectionalDefectMap {
    pub fn compute(local: &LocalCld, overall: &OverallCld) -> Self {
        let q: Vec<Option<f64>> = (0..local.pixel_count())
            .map(|idx| mismatch(local, overall, idx))
            .collect();
        Self::from_values(local.width(), local.height(), q)
    }

    pub fn from_values(width: usize, height: usize, q: Vec<Option<f64>>) -> Self {
        assert_eq!(q.len(), width * height, "mismatch field size");
        let (sum, count) = q
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
        let mean_q = if count == 0 { 0.0 } else { sum / count as f64 };
        Self {
            width,
            height,
            q,
            mean_q,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn supported_count(&self) -> usize {
        self.q.iter().flatten().count()
    }

    /// Every defined mismatch equals the mean (in particular all zero), so no
    /// threshold ever marks a pixel defective.
    pub fn is_degenerate(&self) -> bool {
        self.mean_q <= 0.0
    }

    /// `(q - mean) / mean` per pixel; absent for unsupported pixels and for a
    /// degenerate field.
    pub fn excess(&self, idx: usize) -> Option<f64> {
        if self.is_degenerate() {
            return None;
        }
        self.q[idx].map(|q| (q - self.mean_q) / self.mean_q)
    }

    pub fn is_defective(&self, idx: usize, tau_doubleprime: f64) -> bool {
        self.excess(idx).is_some_and(|e| e > tau_doubleprime)
    }

    pub fn alpha_count(&self, tau_doubleprime: f64) -> usize {
        (0..self.pixel_count())
            .filter(|&idx| self.is_defective(idx, tau_doubleprime))
            .count()
    }

    /// Defective fraction of the whole image at `tau_doubleprime`.
    pub fn alpha_ratio(&self, tau_doubleprime: f64) -> f64 {
        self.alpha_count(tau_doubleprime) as f64 / self.pixel_count() as f64
    }

    /// Smallest threshold at which no pixel is defective.
    pub fn t_doubleprime(&self) -> Result<f64> {
        if self.supported_count() == 0 {
            return Err(CldError::NoSupport);
        }
        if self.is_degenerate() {
            return Err(CldError::UniformShape);
        }
        Ok((0..self.pixel_count())
            .filter_map(|idx| self.excess(idx))
            .fold(0.0, f64::max))
    }

    /// Sorted distinct thresholds at which the defective fraction can change,
    /// starting with 0.
    fn steps(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.pixel_count())
            .filter_map(|idx| self.excess(idx))
            .filter(|&e| e >= 0.0)
            .collect();
        v.push(0.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Integer bookkeeping that splits the defect range into regularly spaced
/// percentages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    /// Largest defect fraction, rounded up to a whole percent.
    pub alpha_max: u64,
    pub r: u64,
    pub j_max: u64,
    pub delta: f64,
}

impl PartitionParams {
    fn from_alpha_max(alpha_max: u64, k: usize) -> Result<Self> {
        if k < 3 {
            return Err(CldError::InvalidParameter(format!(
                "k must be at least 3, got {k}"
            )));
        }
        if alpha_max == 0 {
            return Err(CldError::EmptyPartition);
        }
        let k = k as u64;
        let r = alpha_max % k;
        let j_max = if r == 0 { k - 2 } else { k - 1 };
        Ok(Self {
            alpha_max,
            r,
            j_max,
            delta: alpha_max as f64 / (100 * j_max) as f64,
        })
    }

    /// Exact variant for a defect count out of `total` pixels.
    pub fn from_counts(defective: usize, total: usize, k: usize) -> Result<Self> {
        let alpha_max = (100 * defective as u64).div_ceil(total as u64);
        Self::from_alpha_max(alpha_max, k)
    }

    /// Defect fraction of interior row `j` (1-based).
    pub fn alpha(&self, j: u64) -> f64 {
        (j * self.alpha_max) as f64 / (100 * self.j_max) as f64
    }
}

pub fn partition_params(alpha_max_ratio: f64, k: usize) -> Result<PartitionParams> {
    if !(0.0..=1.0).contains(&alpha_max_ratio) {
        return Err(CldError::InvalidParameter(format!(
            "defect ratio must lie in [0, 1], got {alpha_max_ratio}"
        )));
    }
    PartitionParams::from_alpha_max((100.0 * alpha_max_ratio).ceil() as u64, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectEntry {
    pub alpha: f64,
    pub tau: f64,
    /// False when the row's fraction lies above the fraction reached at
    /// `tau = 0`; such rows fall back to `tau = 0`.
    pub reachable: bool,
}

/// Defect-percentage-to-threshold table, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectTable {
    #[serde(rename = "T_doubleprime")]
    pub t_doubleprime: f64,
    pub alpha_max_ratio: f64,
    pub alpha_max: u64,
    pub k: usize,
    pub r: u64,
    pub j_max: u64,
    pub delta: f64,
    pub entries: Vec<DefectEntry>,
}

impl DefectTable {
    pub fn build(ddmap: &DirectionalDefectMap, k: usize) -> Result<Self> {
        if k < 3 {
            return Err(CldError::InvalidParameter(format!(
                "k must be at least 3, got {k}"
            )));
        }
        let t_doubleprime = match ddmap.t_doubleprime() {
            Err(CldError::UniformShape) => return Err(CldError::EmptyPartition),
            other => other?,
        };
        let total = ddmap.pixel_count();
        let at_zero = ddmap.alpha_count(0.0);
        let params = PartitionParams::from_counts(at_zero, total, k)?;
        let steps = ddmap.steps();

        let mut entries = Vec::with_capacity(params.j_max as usize + 2);
        entries.push(DefectEntry {
            alpha: 0.0,
            tau: t_doubleprime,
            reachable: true,
        });
        for j in 1..=params.j_max {
            // ceil(alpha_j * hw) defective pixels are needed.
            let required =
                (j * params.alpha_max * total as u64).div_ceil(100 * params.j_max) as usize;
            let entry = if required > at_zero {
                DefectEntry {
                    alpha: params.alpha(j),
                    tau: 0.0,
                    reachable: false,
                }
            } else {
                DefectEntry {
                    alpha: params.alpha(j),
                    tau: threshold_for_count(ddmap, &steps, required, t_doubleprime),
                    reachable: true,
                }
            };
            entries.push(entry);
        }
        entries.push(DefectEntry {
            alpha: params.alpha_max as f64 / 100.0,
            tau: 0.0,
            reachable: true,
        });

        Ok(Self {
            t_doubleprime,
            alpha_max_ratio: at_zero as f64 / total as f64,
            alpha_max: params.alpha_max,
            k,
            r: params.r,
            j_max: params.j_max,
            delta: params.delta,
            entries,
        })
    }

    /// Threshold of the first row whose defect fraction is at least
    /// `percent`.
    pub fn resolve_defect_pct(&self, percent: f64) -> Result<f64> {
        if percent < 0.0 || percent > self.alpha_max as f64 {
            return Err(CldError::UnreachableDefect {
                requested: percent,
                alpha_max: self.alpha_max as f64,
            });
        }
        let entry = self
            .entries
            .iter()
            .find(|e| e.alpha * 100.0 >= percent - 1e-9)
            .expect("last row holds alpha_max");
        Ok(entry.tau)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["alpha", "tau_doubleprime", "reachable"])?;
        for e in &self.entries {
            wtr.write_record([e.alpha.to_string(), e.tau.to_string(), e.reachable.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Largest step threshold at which at least `required` pixels are still
/// defective: the start of the last plateau of the defect fraction that
/// reaches the requested count.
///
/// The crossing is bracketed by bisection on `[0, T'']`, then snapped to the
/// step values, since the defect fraction only changes there.
fn threshold_for_count(
    ddmap: &DirectionalDefectMap,
    steps: &[f64],
    required: usize,
    t_doubleprime: f64,
) -> f64 {
    let holds = |tau: f64| ddmap.alpha_count(tau) >= required;
    let (mut lo, mut hi) = (0.0, t_doubleprime);
    debug_assert!(holds(lo) && !holds(hi));
    while hi - lo > BISECTION_TOLERANCE {
        let mid = lo + 0.5 * (hi - lo);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = steps
        .iter()
        .position(|&s| s > lo && s <= hi && !holds(s))
        .expect("crossing step lies inside the final bracket");
    steps[crossing - 1]
}
