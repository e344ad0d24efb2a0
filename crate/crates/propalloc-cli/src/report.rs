//! Run reports and their CSV/JSON emission.
//!
//! The CSV schema is fixed: `instance_id, mechanism, eq_kind, eps, eps_ci,
//! sw_eq, ew_eq, sw_opt, ew_opt, ratio, bound, pass, seed, wallclock_ms`.
//! The JSON form mirrors the field names. Bounds are stored as short
//! machine-checkable clause strings so a verdict can always be re-derived
//! from the stored numbers.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => bail!("unknown format {other:?} (expected csv or json)"),
        }
    }
}

/// One verified scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance_id: String,
    pub mechanism: String,
    pub eq_kind: String,
    /// Deviation gain certified by the verifier (for no-regret runs, the
    /// maximum per-agent regret rate).
    pub eps: f64,
    /// Confidence half-width of `eps` (0 for exact enumeration).
    pub eps_ci: f64,
    pub sw_eq: f64,
    pub ew_eq: Option<f64>,
    pub sw_opt: f64,
    pub ew_opt: Option<f64>,
    /// Optimal over equilibrium welfare, social or effective depending on
    /// the benchmark.
    pub ratio: f64,
    pub bound: String,
    pub pass: bool,
    pub seed: u64,
    pub wallclock_ms: u64,
}

/// One clause of a bound expression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Clause {
    EpsAtMost(f64),
    RatioAtLeast(f64),
    RatioAtMost(f64),
    /// `sw_eq >= sw_opt/2 - slack`
    HalfWelfare { slack: f64 },
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::EpsAtMost(v) => write!(f, "eps<={v}"),
            Clause::RatioAtLeast(v) => write!(f, "ratio>={v}"),
            Clause::RatioAtMost(v) => write!(f, "ratio<={v}"),
            Clause::HalfWelfare { slack } => write!(f, "sw_eq>=sw_opt/2-{slack}"),
        }
    }
}

impl FromStr for Clause {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(v) = s.strip_prefix("eps<=") {
            return Ok(Clause::EpsAtMost(v.parse()?));
        }
        if let Some(v) = s.strip_prefix("ratio>=") {
            return Ok(Clause::RatioAtLeast(v.parse()?));
        }
        if let Some(v) = s.strip_prefix("ratio<=") {
            return Ok(Clause::RatioAtMost(v.parse()?));
        }
        if let Some(v) = s.strip_prefix("sw_eq>=sw_opt/2-") {
            return Ok(Clause::HalfWelfare { slack: v.parse()? });
        }
        bail!("unparseable bound clause {s:?}")
    }
}

impl Clause {
    pub fn holds(&self, report: &RunReport) -> bool {
        match self {
            Clause::EpsAtMost(v) => report.eps <= *v,
            Clause::RatioAtLeast(v) => report.ratio >= *v,
            Clause::RatioAtMost(v) => report.ratio <= *v,
            Clause::HalfWelfare { slack } => report.sw_eq >= report.sw_opt / 2.0 - slack,
        }
    }
}

/// Renders clauses into the `bound` field.
pub fn bound_string(clauses: &[Clause]) -> String {
    clauses
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Re-derives a verdict from the stored numbers and the bound string.
pub fn bound_holds(report: &RunReport) -> Result<bool> {
    let mut ok = true;
    for part in report.bound.split(" and ") {
        ok &= Clause::from_str(part.trim())?.holds(report);
    }
    Ok(ok)
}

/// Writes reports to `path`. CSV columns are fixed; JSON is a pretty array
/// mirroring the field names. An empty report list is an error.
pub fn emit_report(reports: &[RunReport], format: ReportFormat, path: &Path) -> Result<()> {
    if reports.is_empty() {
        bail!("refusing to emit an empty report list");
    }
    match format {
        ReportFormat::Json => {
            let json = serde_json::to_string_pretty(reports)?;
            std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)
                .with_context(|| format!("opening {}", path.display()))?;
            for report in reports {
                w.serialize(report)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// One-line console rendering.
pub fn summarize(report: &RunReport) -> String {
    format!(
        "{:24} {:10} {:9} eps={:<9.3e} ratio={:<8.4} bound[{}] {}",
        report.instance_id,
        report.mechanism,
        report.eq_kind,
        report.eps,
        report.ratio,
        report.bound,
        if report.pass { "PASS" } else { "FAIL" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            instance_id: "thm1-m4".into(),
            mechanism: "standard".into(),
            eq_kind: "bayesian".into(),
            eps: 1e-9,
            eps_ci: 0.0,
            sw_eq: 2.0 / 3.0,
            ew_eq: None,
            sw_opt: 1.0,
            ew_opt: None,
            ratio: 1.5,
            bound: bound_string(&[Clause::EpsAtMost(1e-6), Clause::RatioAtLeast(1.0)]),
            pass: true,
            seed: 7,
            wallclock_ms: 12,
        }
    }

    #[test]
    fn clauses_round_trip_and_rederive() {
        let report = sample();
        assert_eq!(report.bound, "eps<=0.000001 and ratio>=1");
        assert!(bound_holds(&report).unwrap());
        let mut failing = report.clone();
        failing.ratio = 0.9;
        assert!(!bound_holds(&failing).unwrap());
    }

    #[test]
    fn csv_has_exactly_fourteen_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_report(&[sample()], ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "instance_id,mechanism,eq_kind,eps,eps_ci,sw_eq,ew_eq,sw_opt,ew_opt,ratio,bound,\
             pass,seed,wallclock_ms"
        );
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 14);
    }

    #[test]
    fn empty_report_list_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(emit_report(&[], ReportFormat::Csv, &path).is_err());
    }

    #[test]
    fn json_and_csv_carry_identical_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample();
        let csv_path = dir.path().join("out.csv");
        let json_path = dir.path().join("out.json");
        emit_report(&[report.clone()], ReportFormat::Csv, &csv_path).unwrap();
        emit_report(&[report], ReportFormat::Json, &json_path).unwrap();
        let from_json: Vec<RunReport> =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
        let from_csv: Vec<RunReport> = rdr.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(from_json, from_csv);
    }
}
