//! Case reports: settling time, reaction time, steadiness and ingested
//! variability metrics per case, sorted by reaction time.

pub mod ingest;
pub mod plot;
pub mod rank;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProductivityFunction;
use crate::spc::ProcessMetrics;
use crate::transient::{classify_steadiness, percentile_reaction_time, settling_time, SettlingConfig, Steadiness};

pub use ingest::{ingest_case, ingest_cases, ingest_run};
pub use plot::{emit_step_plot, render_step_plot};
pub use rank::spearman_rank;

pub const REPORT_CSV_HEADER: &str = "name,ts,tt,reaction_pct,cpk,pp,sigma_d,rate_d,cv,steadiness";

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub name: String,
    pub model: ProductivityFunction,
    pub total_time: f64,
    /// Columns measured from raw output data outside this tool.
    pub ingested_metrics: Option<ProcessMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub ts: Option<f64>,
    pub tt: f64,
    pub reaction_fraction: Option<f64>,
    pub metrics: Option<ProcessMetrics>,
    pub steadiness: Option<Steadiness>,
    /// Why the settling computation failed, for rows that could not be evaluated.
    pub error: Option<String>,
}

fn evaluate(case: &CaseRecord, cfg: &SettlingConfig) -> ReportRow {
    let computed = settling_time(&case.model, cfg).and_then(|s| {
        let fraction = percentile_reaction_time(s.settling_time, case.total_time)?;
        Ok((s.settling_time, fraction))
    });
    let (ts, reaction_fraction, steadiness, error) = match computed {
        Ok((ts, fraction)) => (
            Some(ts),
            Some(fraction),
            Some(classify_steadiness(ts, case.total_time, case.model.is_stable())),
            None,
        ),
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    ReportRow {
        name: case.name.clone(),
        ts,
        tt: case.total_time,
        reaction_fraction,
        metrics: case.ingested_metrics,
        steadiness,
        error,
    }
}

/// One row per case, ascending by reaction fraction, ties by name; failed rows last.
pub fn build_report(cases: &[CaseRecord], cfg: &SettlingConfig) -> Result<Vec<ReportRow>> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases to report".into()));
    }
    let mut rows: Vec<ReportRow> = cases.iter().map(|c| evaluate(c, cfg)).collect();
    rows.sort_by(|a, b| match (a.reaction_fraction, b.reaction_fraction) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.name.cmp(&b.name)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.name.cmp(&b.name),
    });
    Ok(rows)
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Report CSV; reaction time as a percentage with two decimals.
pub fn format_report_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for row in rows {
        let opt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map(f).unwrap_or_default();
        let m = row.metrics;
        let fields = [
            csv_field(&row.name),
            opt(row.ts, &|v| format!("{v:.4}")),
            format!("{}", row.tt),
            opt(row.reaction_fraction, &|v| format!("{:.2}", 100.0 * v)),
            opt(m.map(|m| m.cpk), &|v| format!("{v}")),
            opt(m.map(|m| m.pp), &|v| format!("{v}")),
            opt(m.map(|m| m.sigma_d), &|v| format!("{v}")),
            opt(m.map(|m| m.rate_d), &|v| format!("{v}")),
            opt(m.map(|m| m.cv), &|v| format!("{v}")),
            row.steadiness.map_or("error", |s| s.as_str()).to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
