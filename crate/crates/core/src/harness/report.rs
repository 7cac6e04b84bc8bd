use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CpeError, Result};

use super::convergence::ConvergenceReport;
use super::misspec::MisspecReport;
use super::repro::ReproReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = CpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(CpeError::invalid(format!("unknown report format `{other}` (csv or json)"))),
        }
    }
}

/// A report with a flat tabular view for CSV output.
pub trait Report: Serialize {
    fn csv_header(&self) -> &'static str;
    fn csv_rows(&self) -> Vec<String>;
}

impl Report for ConvergenceReport {
    fn csv_header(&self) -> &'static str {
        "n,eps,mean_tail,median_tail,q90_tail,mean_l1,mean_excess_risk"
    }

    fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    r.n, r.eps, r.mean_tail, r.median_tail, r.q90_tail, r.mean_l1, r.mean_excess_risk
                )
            })
            .collect()
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

impl Report for MisspecReport {
    fn csv_header(&self) -> &'static str {
        "x,p,eta,eta_hat,oracle_eta_hat"
    }

    fn csv_rows(&self) -> Vec<String> {
        self.points
            .iter()
            .map(|pt| format!("{},{},{},{},{}", join(&pt.x), pt.p, pt.eta, pt.eta_hat, pt.oracle_eta_hat))
            .collect()
    }
}

impl Report for ReproReport {
    fn csv_header(&self) -> &'static str {
        "branch,x,eta,eta_hat"
    }

    fn csv_rows(&self) -> Vec<String> {
        [("sq", &self.sq), ("sqh", &self.sqh), ("claimed", &self.claimed)]
            .iter()
            .flat_map(|(name, b)| {
                self.xs
                    .iter()
                    .zip(&self.etas)
                    .zip(&b.eta_hat)
                    .map(move |((x, eta), hat)| format!("{name},{x},{eta},{hat}"))
            })
            .collect()
    }
}

/// The report as CSV text or pretty JSON.
pub fn render_report<R: Report>(report: &R, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Csv => {
            let mut out = String::from(report.csv_header());
            out.push('\n');
            for row in report.csv_rows() {
                out.push_str(&row);
                out.push('\n');
            }
            out
        }
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).map_err(|source| CpeError::Json {
                context: "report".into(),
                source,
            })?;
            text.push('\n');
            text
        }
    })
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CpeError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn emit_report<R: Report>(report: &R, format: ReportFormat, path: &Path) -> Result<()> {
    write_atomic(path, render_report(report, format)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::FeatureMap;
    use crate::harness::convergence::TailRow;

    fn report(rows: Vec<TailRow>) -> ConvergenceReport {
        ConvergenceReport {
            loss: "log".into(),
            feature_map: FeatureMap::Affine,
            feature_map_version: 1,
            root_seed: 42,
            repetitions: 3,
            misspecified: false,
            excess_floor: 0.0,
            deltas: vec![],
            rows,
            sizes: vec![],
            markov_violations: 0,
            monotonicity_violations: 0,
            floor_check: None,
            l1_log_log_slope: None,
            failures: vec![],
        }
    }

    fn row(n: usize, eps: f64) -> TailRow {
        TailRow {
            n,
            eps,
            mean_tail: 0.1,
            median_tail: 0.0,
            q90_tail: 0.2,
            mean_l1: 0.05,
            mean_excess_risk: 1.0 / 3.0,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = render_report(&report(vec![]), ReportFormat::Csv).unwrap();
        assert_eq!(text, "n,eps,mean_tail,median_tail,q90_tail,mean_l1,mean_excess_risk\n");
    }

    #[test]
    fn one_row_per_size_and_eps() {
        let rows = vec![row(10, 0.1), row(10, 0.2), row(100, 0.1), row(100, 0.2)];
        let text = render_report(&report(rows), ReportFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn json_round_trip() {
        let r = report(vec![row(10, 0.1)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&r, ReportFormat::Json, &path).unwrap();
        let back: ConvergenceReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = emit_report(&report(vec![]), ReportFormat::Csv, Path::new("/nonexistent/dir/r.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/r.csv"));
    }
}
