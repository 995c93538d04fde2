//! Everything derived from one image at one saturation threshold.

use crate::cld::CldAnalysis;
use crate::ddmap::{DefectTable, DirectionalDefectMap};
use crate::dmap::{DefectMap, SuccessProfile, SuccessTable};
use crate::error::{CldError, Result};
use crate::image::{GrayImage, ImageStats};

/// Thresholds cross the user interface as percentages.
pub fn percent_to_ratio(percent: f64) -> f64 {
    percent / 100.0
}

pub fn ratio_to_percent(ratio: f64) -> f64 {
    ratio * 100.0
}

/// Parses a saturation threshold given in percent, `(0, 100]`.
pub fn tau_from_percent(percent: f64) -> Result<f64> {
    if percent > 0.0 && percent <= 100.0 {
        Ok(percent_to_ratio(percent))
    } else {
        Err(CldError::InvalidParameter(format!(
            "tau must be within (0, 100] percent, got {percent}"
        )))
    }
}

#[derive(Clone, Debug)]
pub struct TauAnalysis {
    pub cld: CldAnalysis,
    pub profile: SuccessProfile,
    pub ddmap: DirectionalDefectMap,
}

impl TauAnalysis {
    pub fn compute(img: &GrayImage, stats: &ImageStats, tau: f64) -> Result<Self> {
        let cld = CldAnalysis::compute(img, stats, tau)?;
        let profile = SuccessProfile::compute(&cld.local, &cld.overall);
        let ddmap = DirectionalDefectMap::compute(&cld.local, &cld.overall);
        Ok(Self {
            cld,
            profile,
            ddmap,
        })
    }

    pub fn tau(&self) -> f64 {
        self.cld.local.tau()
    }

    pub fn success_table(&self, k: usize) -> Result<SuccessTable> {
        SuccessTable::build(&self.profile, k)
    }

    pub fn defect_table(&self, k: usize) -> Result<DefectTable> {
        DefectTable::build(&self.ddmap, k)
    }

    pub fn defect_map(&self, tau_prime: f64) -> DefectMap {
        DefectMap::compute(&self.cld.local, &self.cld.overall, tau_prime)
    }

    /// Defect map at the table row covering `coverage_percent`, with the
    /// resolved tolerance.
    pub fn defect_map_for_coverage(&self, coverage_percent: f64, k: usize) -> Result<(f64, DefectMap)> {
        let tau_prime = self.success_table(k)?.resolve_coverage(coverage_percent)?;
        Ok((tau_prime, self.defect_map(tau_prime)))
    }

    pub fn tau_doubleprime_for_defect_pct(&self, defect_pct: f64, k: usize) -> Result<f64> {
        self.defect_table(k)?.resolve_defect_pct(defect_pct)
    }
}
