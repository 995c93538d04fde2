//! Artifact builders shared by the command line and the HTTP service, so
//! both emit the same bytes for the same image and parameters.

use cldmap::ddmap::DefectTable;
use cldmap::dmap::{DefectMap, PixelClass, SuccessTable};
use cldmap::optimize::{optimize_tau, quality_curve, OptimizationResult, QualityCurve};
use cldmap::pipeline::{percent_to_ratio, ratio_to_percent, tau_from_percent, TauAnalysis};
use cldmap::render::{self, MapFormat};
use cldmap::{CldError, GrayImage, ImageStats, Result};
use serde::Serialize;

pub const DEFAULT_K: usize = 10;

/// How the saturation threshold is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauChoice {
    Percent(f64),
    Auto { grid: usize },
}

/// A threshold given either as a table percentage or as a raw value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    Percent(f64),
    Value(f64),
}

/// Outcome of automatic tuning. A flat quality curve falls back to
/// `tau_max / 2`.
#[derive(Clone, Debug)]
pub enum AutoTau {
    Optimized(OptimizationResult),
    Fallback(f64),
}

impl AutoTau {
    pub fn tau(&self) -> f64 {
        match self {
            AutoTau::Optimized(r) => r.tau0,
            AutoTau::Fallback(t) => *t,
        }
    }
}

pub fn auto_tau(img: &GrayImage, stats: &ImageStats, grid: usize) -> Result<AutoTau> {
    match optimize_tau(img, stats, grid) {
        Ok(r) => Ok(AutoTau::Optimized(r)),
        Err(CldError::DegenerateCurve { fallback_tau }) => Ok(AutoTau::Fallback(fallback_tau)),
        Err(e) => Err(e),
    }
}

/// Resolves the saturation threshold to a unit ratio.
pub fn resolve_tau(img: &GrayImage, stats: &ImageStats, choice: TauChoice) -> Result<(f64, Option<AutoTau>)> {
    match choice {
        TauChoice::Percent(p) => Ok((tau_from_percent(p)?, None)),
        TauChoice::Auto { grid } => {
            let auto = auto_tau(img, stats, grid)?;
            Ok((auto.tau(), Some(auto)))
        }
    }
}

/// The curve behind an automatic choice, or a fresh one for a fixed tau.
pub fn curve_for(img: &GrayImage, stats: &ImageStats, auto: Option<&AutoTau>, grid: usize) -> Result<QualityCurve> {
    match auto {
        Some(AutoTau::Optimized(r)) => Ok(r.curve.clone()),
        _ => quality_curve(img, stats, grid),
    }
}

/// Checks a percentage lies in `[0, 100]`.
pub fn check_percent(name: &str, percent: f64) -> Result<f64> {
    if (0.0..=100.0).contains(&percent) {
        Ok(percent)
    } else {
        Err(CldError::InvalidParameter(format!(
            "{name} must be within [0, 100] percent, got {percent}"
        )))
    }
}

fn check_value(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(CldError::InvalidParameter(format!(
            "{name} must be a finite non-negative value, got {value}"
        )))
    }
}

pub fn parse_format(name: &str) -> Result<MapFormat> {
    match name.to_ascii_lowercase().as_str() {
        "png" => Ok(MapFormat::Png),
        "bmp" => Ok(MapFormat::Bmp),
        other => Err(CldError::InvalidParameter(format!(
            "unknown map format {other:?}; expected png or bmp"
        ))),
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn smap_image(analysis: &TauAnalysis, format: MapFormat) -> Result<Vec<u8>> {
    render::encode(&render::render_smap(&analysis.cld.support), format)
}

pub fn cld_json(analysis: &TauAnalysis) -> Result<Vec<u8>> {
    json_bytes(&analysis.cld.overall)
}

pub fn cld_csv(analysis: &TauAnalysis) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    analysis.cld.overall.write_csv(&mut out)?;
    Ok(out)
}

pub fn curve_csv(curve: &QualityCurve) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    curve.write_csv(&mut out)?;
    Ok(out)
}

pub fn success_table_csv(table: &SuccessTable) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    table.write_csv(&mut out)?;
    Ok(out)
}

pub fn defect_table_csv(table: &DefectTable) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    table.write_csv(&mut out)?;
    Ok(out)
}

pub struct DmapOutput {
    pub tau_prime: f64,
    pub map: DefectMap,
    pub table: SuccessTable,
    pub image: Vec<u8>,
}

pub fn dmap(analysis: &TauAnalysis, selection: Selection, k: usize, format: MapFormat) -> Result<DmapOutput> {
    let table = analysis.success_table(k)?;
    let tau_prime = match selection {
        Selection::Percent(p) => table.resolve_coverage(check_percent("coverage", p)?)?,
        Selection::Value(v) => check_value("tau_prime", v)?,
    };
    let map = analysis.defect_map(tau_prime);
    let image = render::encode(&render::render_dmap(&map), format)?;
    Ok(DmapOutput {
        tau_prime,
        map,
        table,
        image,
    })
}

pub struct DdmapOutput {
    pub tau_doubleprime: f64,
    pub defect_fraction: f64,
    pub table: DefectTable,
    pub image: Vec<u8>,
}

pub fn ddmap(analysis: &TauAnalysis, selection: Selection, k: usize, format: MapFormat) -> Result<DdmapOutput> {
    let table = analysis.defect_table(k)?;
    let tau_doubleprime = match selection {
        Selection::Percent(p) => table.resolve_defect_pct(check_percent("defect_pct", p)?)?,
        Selection::Value(v) => check_value("tau_doubleprime", v)?,
    };
    let image = render::encode(&render::render_ddmap(&analysis.ddmap, tau_doubleprime), format)?;
    Ok(DdmapOutput {
        tau_doubleprime,
        defect_fraction: analysis.ddmap.alpha_ratio(tau_doubleprime),
        table,
        image,
    })
}

/// Where the defective pixels of a map fall, split at `width / 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalfSplit {
    pub red_left: usize,
    pub red_right: usize,
    pub red_fraction_left: f64,
    pub red_fraction_right: f64,
}

impl HalfSplit {
    pub fn of(map: &DefectMap) -> Self {
        let half = map.width() / 2;
        let (mut left, mut right) = (0, 0);
        for (idx, class) in map.classes().enumerate() {
            if class == PixelClass::Defective {
                if idx % map.width() < half {
                    left += 1;
                } else {
                    right += 1;
                }
            }
        }
        let total = (left + right).max(1) as f64;
        Self {
            red_left: left,
            red_right: right,
            red_fraction_left: left as f64 / total,
            red_fraction_right: right as f64 / total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentEntry {
    pub coverage_percent: f64,
    pub tau_prime: f64,
    pub successful_fraction: f64,
    pub file: String,
    #[serde(flatten)]
    pub split: HalfSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentReport {
    pub tau_percent: f64,
    pub k: usize,
    pub maps: Vec<SegmentEntry>,
}

/// File name of the segmentation map for one coverage.
pub fn segment_file_name(coverage: f64, format: MapFormat) -> String {
    format!("dmap_{coverage}.{}", format.extension())
}

/// Summary written next to the artifacts of `analyze`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeSummary {
    pub width: usize,
    pub height: usize,
    pub stats: ImageStats,
    pub tau_percent: f64,
    pub auto: bool,
    pub fallback: bool,
    pub mean_length: f64,
    pub support_fraction: f64,
}

pub fn percent(ratio: f64) -> f64 {
    ratio_to_percent(ratio)
}

pub fn ratio(percent: f64) -> f64 {
    percent_to_ratio(percent)
}
