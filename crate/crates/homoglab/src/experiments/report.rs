//! Convergence reports: rate fitting, the CSV/JSON emitters, and their
//! deterministic formatting (17 significant digits, '.' decimals, '\n'
//! line endings; the seconds column is zeroed in the CSV so serial re-runs
//! are byte-identical, with wall-clock times kept in the JSON companion).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, StudyKind};

/// One study row; the first nine fields are the CSV columns.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub eps: f64,
    pub h: f64,
    pub l2_err: f64,
    pub h1rho_err: f64,
    pub h12_g: f64,
    pub hm12_proxy: f64,
    pub iters_eps: usize,
    pub iters_hom: usize,
    pub seconds: f64,
    /// || phi_eps ||_rho (source-free studies).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_norm_eps: Option<f64>,
    /// || phi_eps ||_rho / (eps^{1/2} h12 + proxy), the monitored bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_ratio: Option<f64>,
    /// eps^{1/2} ||g_eps||, the monitored hypothesis of the oscillating study.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<f64>,
    /// Monitored self-consistency of the corrector expansion: L2 gap
    /// between the element gradients of its value field and its gradient
    /// comparison object.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expansion_consistency: Option<f64>,
}

/// Outcome of a least-squares rate fit.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitOutcome {
    /// All points sat at (or below) the solver floor; no slope is reported.
    Floor,
    Fit {
        slope: f64,
        max_log_residual: f64,
        points_used: usize,
        excluded: usize,
    },
}

/// Least-squares slope of log(error) against log(eps). Non-positive errors
/// are at the floor: they are excluded and reported; fewer than three
/// surviving points flags the whole column as floored.
pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<FitOutcome> {
    if eps.len() != errors.len() {
        return Err(Error::Input("eps and error lists differ in length".into()));
    }
    if eps.len() < 3 {
        return Err(Error::Study(format!(
            "rate fit needs at least 3 points, got {}",
            eps.len()
        )));
    }
    let kept: Vec<(f64, f64)> = eps
        .iter()
        .zip(errors)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    let excluded = eps.len() - kept.len();
    if kept.len() < 3 {
        return Ok(FitOutcome::Floor);
    }
    let n = kept.len() as f64;
    let mean_x = kept.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = kept.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = kept.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_log_residual = kept
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0f64, f64::max);
    Ok(FitOutcome::Fit {
        slope,
        max_log_residual,
        points_used: kept.len(),
        excluded,
    })
}

/// A finished study: rows sorted by decreasing eps plus the fitted slopes.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub study: StudyKind,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub slopes: BTreeMap<String, FitOutcome>,
    /// Whether the monitored oscillating-family hypothesis quantity is
    /// strictly decreasing along the eps list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis_decreasing: Option<bool>,
}

impl ConvergenceReport {
    pub fn slope(&self, name: &str) -> Option<FitOutcome> {
        self.slopes.get(name).copied()
    }
}

/// 17 significant digits, always with an exponent; round-trips any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str = "eps,h,l2_err,h1rho_err,h12_g,hm12_proxy,iters_eps,iters_hom,seconds";

/// Write the CSV and its JSON companion (same path with extension `json`).
/// The CSV seconds column is written as zero: the determinism contract is
/// byte-level and wall-clock time is not a function of the config. Measured
/// timings stay in the JSON rows.
pub fn emit_report(report: &ConvergenceReport, csv_path: &Path) -> Result<()> {
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut csv = String::new();
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            format_float(row.eps),
            format_float(row.h),
            format_float(row.l2_err),
            format_float(row.h1rho_err),
            format_float(row.h12_g),
            format_float(row.hm12_proxy),
            row.iters_eps,
            row.iters_hom,
            format_float(0.0),
        ));
    }
    let mut f = std::fs::File::create(csv_path)?;
    f.write_all(csv.as_bytes())?;

    let json_path = csv_path.with_extension("json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Study(format!("report serialization failed: {e}")))?;
    let mut f = std::fs::File::create(json_path)?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
