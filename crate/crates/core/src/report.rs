//! Text, JSON and CSV renderings of analysis results.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::effect::EffectEstimate;
use crate::engine::{AnalysisReport, Summary};
use crate::error::{Error, Result};
use crate::sensitivity::{RowOutcome, SensitivityRow};

/// Version of the JSON layout written by [`to_json`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::input(format!("unknown report format '{s}'; use text, json or csv"))),
        }
    }
}

/// Two decimals, without a sign on values that round to zero.
pub fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// `median  [lo, hi]` at two decimals.
pub fn fmt_summary(s: &Summary) -> String {
    format!("{}  [{}, {}]", fmt2(s.median), fmt2(s.ci_lo), fmt2(s.ci_hi))
}

pub fn emit_report(report: &AnalysisReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Text => Ok(to_text(report)),
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => Ok(to_csv(report)),
    }
}

/// One line per parameter, e.g. `mu  -0.49  [-1.10, 0.15]`.
pub fn to_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let level = (r.tau.level * 100.0).round();
    let _ = writeln!(out, "prior: {}   effect prior: {}   k = {}", r.prior.label(), r.effect_prior, r.studies.len());
    let _ = writeln!(out, "median  [{level}% {} CI]", kind_name(&r.tau));
    let _ = writeln!(out, "tau  {}", fmt_summary(&r.tau));
    let _ = writeln!(out, "mu  {}", fmt_summary(&r.mu));
    for (s, sh) in r.studies.iter().zip(&r.shrinkage) {
        let _ = writeln!(out, "theta[{}]  {}", s.label, fmt_summary(sh));
    }
    let _ = writeln!(out, "prediction  {}", fmt_summary(&r.prediction));
    let _ = writeln!(out, "tau (MAP)  {}", fmt2(r.map_tau));
    if let Some(u) = &r.uisd {
        let _ = writeln!(out, "UISD  {:.3}", u.value);
    }
    out
}

fn kind_name(s: &Summary) -> &'static str {
    match s.ci_kind {
        crate::engine::CiKind::Shortest => "shortest",
        crate::engine::CiKind::Central => "central",
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema: u32,
    #[serde(flatten)]
    report: AnalysisReport,
}

/// Versioned JSON with every number at full precision.
pub fn to_json(report: &AnalysisReport) -> Result<String> {
    let env = Envelope {
        schema: SCHEMA_VERSION,
        report: report.clone(),
    };
    serde_json::to_string_pretty(&env).map_err(|e| Error::numeric(format!("cannot serialize report: {e}")))
}

/// Inverse of [`to_json`].
pub fn from_json(text: &str) -> Result<AnalysisReport> {
    let env: Envelope = serde_json::from_str(text).map_err(|e| Error::input(format!("invalid report JSON: {e}")))?;
    if env.schema != SCHEMA_VERSION {
        return Err(Error::input(format!(
            "report schema {} is not supported (expected {SCHEMA_VERSION})",
            env.schema
        )));
    }
    Ok(env.report)
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `parameter,label,median,ci_lo,ci_hi,level`: τ, μ, one row per study and
/// the prediction.
pub fn to_csv(r: &AnalysisReport) -> String {
    let mut out = String::from("parameter,label,median,ci_lo,ci_hi,level\n");
    let mut row = |param: &str, label: &str, s: &Summary| {
        let _ = writeln!(out, "{param},{},{},{},{},{}", csv_quote(label), s.median, s.ci_lo, s.ci_hi, s.level);
    };
    row("tau", "", &r.tau);
    row("mu", "", &r.mu);
    for (s, sh) in r.studies.iter().zip(&r.shrinkage) {
        row("theta", &s.label, sh);
    }
    row("prediction", "", &r.prediction);
    out
}

/// Derived estimates as `label,y,sigma,n`.
pub fn estimates_csv(estimates: &[EffectEstimate]) -> String {
    let mut out = String::from("label,y,sigma,n\n");
    for e in estimates {
        let n = e.n.map(|n| n.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{n}", csv_quote(&e.label), e.y, e.sigma);
    }
    out
}

/// The sensitivity table: one line per prior with τ, μ and prediction.
pub fn sensitivity_text(rows: &[SensitivityRow]) -> String {
    let width = rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(5).max(5);
    let cell = 22;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:width$}  {:<cell$}  {:<cell$}  {:<cell$}",
        "prior", "tau", "mu", "prediction"
    );
    for r in rows {
        match &r.outcome {
            RowOutcome::Report(rep) => {
                let _ = writeln!(
                    out,
                    "{:width$}  {:<cell$}  {:<cell$}  {:<cell$}",
                    r.label,
                    fmt_summary(&rep.tau),
                    fmt_summary(&rep.mu),
                    fmt_summary(&rep.prediction)
                );
            }
            RowOutcome::Skipped(why) => {
                let _ = writeln!(out, "{:width$}  skipped: {why}", r.label);
            }
        }
    }
    out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}

/// The sensitivity table as CSV, one row per prior.
pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from(
        "prior,tau_median,tau_lo,tau_hi,mu_median,mu_lo,mu_hi,pred_median,pred_lo,pred_hi,note\n",
    );
    for r in rows {
        match &r.outcome {
            RowOutcome::Report(rep) => {
                let _ = write!(out, "{}", csv_quote(&r.label));
                for s in [&rep.tau, &rep.mu, &rep.prediction] {
                    let _ = write!(out, ",{},{},{}", s.median, s.ci_lo, s.ci_hi);
                }
                out.push_str(",\n");
            }
            RowOutcome::Skipped(why) => {
                let _ = writeln!(out, "{},,,,,,,,,,{}", csv_quote(&r.label), csv_quote(why));
            }
        }
    }
    out
}
