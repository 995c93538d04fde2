//! File-writing implementations of the subcommands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cldmap::optimize::{mean_length, support_fraction};
use cldmap::pipeline::TauAnalysis;
use cldmap::render::{self, MapFormat};
use cldmap::{load_gray, stats, CldError, GrayImage, ImageStats, SyntheticSpec};
use serde::Serialize;

use crate::artifacts::{
    self, AnalyzeSummary, AutoTau, HalfSplit, SegmentEntry, SegmentReport, Selection, TauChoice,
};

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn load(input: &Path) -> Result<(GrayImage, ImageStats)> {
    let img = load_gray(input)?;
    let s = stats(&img)?;
    Ok((img, s))
}

fn analysis(img: &GrayImage, s: &ImageStats, tau: TauChoice) -> Result<(TauAnalysis, Option<AutoTau>)> {
    let (tau, auto) = artifacts::resolve_tau(img, s, tau)?;
    if let Some(AutoTau::Fallback(t)) = &auto {
        eprintln!(
            "warning: quality curve is flat; using tau = {}%",
            artifacts::percent(*t)
        );
    }
    Ok((TauAnalysis::compute(img, s, tau)?, auto))
}

/// Writes `cld.json`, `cld.csv`, the support map, `quality_curve.csv` and
/// `summary.json`.
pub fn analyze(input: &Path, tau: TauChoice, grid: usize, out: &Path, format: MapFormat) -> Result<AnalyzeSummary> {
    let (img, s) = load(input)?;
    if s.tau_max <= 0.0 {
        return Err(CldError::DegenerateImage("constant image: tau_max is zero").into());
    }
    let (a, auto) = analysis(&img, &s, tau)?;
    let curve = artifacts::curve_for(&img, &s, auto.as_ref(), grid)?;

    prepare(out)?;
    write(out, "cld.json", &artifacts::cld_json(&a)?)?;
    write(out, "cld.csv", &artifacts::cld_csv(&a)?)?;
    write(out, &format!("smap.{}", format.extension()), &artifacts::smap_image(&a, format)?)?;
    write(out, "quality_curve.csv", &artifacts::curve_csv(&curve)?)?;

    let summary = AnalyzeSummary {
        width: img.width(),
        height: img.height(),
        stats: s,
        tau_percent: artifacts::percent(a.tau()),
        auto: auto.is_some(),
        fallback: matches!(auto, Some(AutoTau::Fallback(_))),
        mean_length: mean_length(&a.cld.overall).unwrap_or(0.0),
        support_fraction: support_fraction(&a.cld.support),
    };
    write(out, "summary.json", &artifacts::json_bytes(&summary)?)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmapSummary {
    pub tau_percent: f64,
    pub tau_prime: f64,
    pub successful_fraction: f64,
    pub attainable_max_percent: f64,
}

/// Writes the defect map and the coverage table `h_prime.{json,csv}`.
pub fn dmap(
    input: &Path,
    tau: TauChoice,
    selection: Selection,
    k: usize,
    out: &Path,
    format: MapFormat,
) -> Result<DmapSummary> {
    let (img, s) = load(input)?;
    let (a, _) = analysis(&img, &s, tau)?;
    let res = artifacts::dmap(&a, selection, k, format)?;
    prepare(out)?;
    write(out, &format!("dmap.{}", format.extension()), &res.image)?;
    write(out, "h_prime.json", &artifacts::json_bytes(&res.table)?)?;
    write(out, "h_prime.csv", &artifacts::success_table_csv(&res.table)?)?;
    Ok(DmapSummary {
        tau_percent: artifacts::percent(a.tau()),
        tau_prime: res.tau_prime,
        successful_fraction: res.map.successful_fraction(),
        attainable_max_percent: artifacts::percent(res.table.attainable_max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdmapSummary {
    pub tau_percent: f64,
    pub tau_doubleprime: f64,
    pub defect_fraction: f64,
    pub alpha_max: u64,
    #[serde(rename = "T_doubleprime")]
    pub t_doubleprime: f64,
}

/// Writes the directional defect map and the table
/// `h_doubleprime.{json,csv}`.
pub fn ddmap(
    input: &Path,
    tau: TauChoice,
    selection: Selection,
    k: usize,
    out: &Path,
    format: MapFormat,
) -> Result<DdmapSummary> {
    let (img, s) = load(input)?;
    let (a, _) = analysis(&img, &s, tau)?;
    let res = artifacts::ddmap(&a, selection, k, format)?;
    prepare(out)?;
    write(out, &format!("ddmap.{}", format.extension()), &res.image)?;
    write(out, "h_doubleprime.json", &artifacts::json_bytes(&res.table)?)?;
    write(out, "h_doubleprime.csv", &artifacts::defect_table_csv(&res.table)?)?;
    Ok(DdmapSummary {
        tau_percent: artifacts::percent(a.tau()),
        tau_doubleprime: res.tau_doubleprime,
        defect_fraction: res.defect_fraction,
        alpha_max: res.table.alpha_max,
        t_doubleprime: res.table.t_doubleprime,
    })
}

/// Tunes tau, then writes one defect map per coverage and `segment.json`.
pub fn segment(
    input: &Path,
    coverages: &[f64],
    k: usize,
    grid: usize,
    out: &Path,
    format: MapFormat,
) -> Result<SegmentReport> {
    if coverages.is_empty() {
        bail!("at least one coverage percentage is required");
    }
    let (img, s) = load(input)?;
    let (a, _) = analysis(&img, &s, TauChoice::Auto { grid })?;
    prepare(out)?;
    let mut maps = Vec::with_capacity(coverages.len());
    for &c in coverages {
        let res = artifacts::dmap(&a, Selection::Percent(c), k, format)?;
        let file = artifacts::segment_file_name(c, format);
        write(out, &file, &res.image)?;
        maps.push(SegmentEntry {
            coverage_percent: c,
            tau_prime: res.tau_prime,
            successful_fraction: res.map.successful_fraction(),
            file,
            split: HalfSplit::of(&res.map),
        });
    }
    let report = SegmentReport {
        tau_percent: artifacts::percent(a.tau()),
        k,
        maps,
    };
    write(out, "segment.json", &artifacts::json_bytes(&report)?)?;
    Ok(report)
}

/// Generates a synthetic texture; `.bmp` paths are written as BMP, all
/// others as PNG.
pub fn fixture(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let img = spec.generate()?;
    let format = match out.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("bmp") => MapFormat::Bmp,
        _ => MapFormat::Png,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare(parent)?;
    }
    render::save(&img.to_luma8(), out, format).with_context(|| format!("writing {}", out.display()))
}
