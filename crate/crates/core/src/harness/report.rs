use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::RunSummary;
use crate::bound::BoundResult;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub mean_mse: f64,
    pub ci_half_width: f64,
    /// `(mean − bound) / bound` in percent.
    pub gap_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub profile: Option<String>,
    pub bound: Option<f64>,
    pub rows: Vec<ReportRow>,
}

/// Tabulates schedulers against the bound, rejecting impossible results.
pub fn compare(summaries: &[RunSummary], bound: Option<&BoundResult>) -> Result<Report> {
    if let Some(first) = summaries.first() {
        for s in &summaries[1..] {
            if s.profile_hash != first.profile_hash || s.channel_hash != first.channel_hash {
                return Err(Error::Report(format!(
                    "summaries disagree on profile/channel: {} ({}) vs {} ({})",
                    first.profile, first.scheduler.name(), s.profile, s.scheduler.name()
                )));
            }
        }
    }
    let b = bound.map(|b| b.lower_bound);
    let mut rows = Vec::new();
    for s in summaries {
        if let Some(b) = b {
            if s.mean_mse < b - 3.0 * s.ci_half_width - 1e-9 * b.abs() {
                return Err(Error::Report(format!(
                    "{} mean MSE {:.6} is below the lower bound {:.6} beyond 3 CI half-widths",
                    s.scheduler.name(),
                    s.mean_mse,
                    b
                )));
            }
        }
        rows.push(ReportRow {
            name: s.scheduler.name().to_string(),
            mean_mse: s.mean_mse,
            ci_half_width: s.ci_half_width,
            gap_percent: b.map(|b| 100.0 * (s.mean_mse - b) / b),
        });
    }
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        profile: summaries.first().map(|s| s.profile.clone()),
        bound: b,
        rows,
    })
}

impl Report {
    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>12} {:>10} {:>9}", "scheduler", "mean_mse", "ci95", "gap_%");
        if let Some(b) = self.bound {
            let _ = writeln!(out, "{:<18} {:>12.4} {:>10} {:>9}", "bound", b, "-", "0.00");
        }
        for r in &self.rows {
            let gap = r.gap_percent.map(|g| format!("{g:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:<18} {:>12.4} {:>10.4} {:>9}", r.name, r.mean_mse, r.ci_half_width, gap);
        }
        out
    }
}
