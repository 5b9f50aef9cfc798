//! Readers and writers for the on-disk formats.
//!
//! * run CSV: header `t,u,y`, ascending strictly increasing `t`
//! * sample CSV: header `y`
//! * chain CSV: header `u,ce`
//! * metrics CSV: header `cpk,pp,sigma_d,rate_d,cv`, one data row
//! * case directory: a `case.meta` file of `key = value` lines
//!
//! `case.meta` keys: `name` (required), `tt` total process time (required),
//! `model` model file path relative to the case directory (required),
//! `metrics` metrics CSV path (optional). `#` starts a comment.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flowchain::ChainNode;
use crate::model::{parse_model, ProcessRun, ProductivityFunction, TimeSeries};
use crate::spc::{OutputSample, ProcessMetrics};

use super::CaseRecord;

pub const CASE_META_FILE: &str = "case.meta";

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn ingest_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn read_model(path: &Path) -> Result<ProductivityFunction> {
    parse_model(&read_text(path)?).map_err(|e| ingest_error(path, e.to_string()))
}

/// Parses a CSV with exactly the `expected` header; returns rows with their file line numbers.
fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ingest_error(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ingest_error(
            path,
            format!("expected header '{}', found '{}'", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Row {
                path: path.display().to_string(),
                row,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let values = record
            .iter()
            .zip(expected)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Row {
                        path: path.display().to_string(),
                        row,
                        message: format!("{name}: '{field}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((row, values));
    }
    Ok(rows)
}

/// Reads a `t,u,y` run; total time is the last timestamp.
pub fn ingest_run(path: &Path) -> Result<ProcessRun> {
    let rows = read_table(path, &["t", "u", "y"])?;
    if rows.len() < 2 {
        return Err(ingest_error(path, "a run needs at least two rows"));
    }
    for pair in rows.windows(2) {
        if pair[1].1[0] <= pair[0].1[0] {
            return Err(Error::Row {
                path: path.display().to_string(),
                row: pair[1].0,
                message: format!(
                    "timestamp {} does not increase (previous row has {})",
                    pair[1].1[0], pair[0].1[0]
                ),
            });
        }
    }
    let t: Vec<f64> = rows.iter().map(|(_, r)| r[0]).collect();
    let u = rows.iter().map(|(_, r)| r[1]).collect();
    let y = rows.iter().map(|(_, r)| r[2]).collect();
    let input = TimeSeries::new(t.clone(), u)?;
    let output = TimeSeries::new(t, y)?;
    let total = input.last_time();
    ProcessRun::new(input, output, total).map_err(|e| ingest_error(path, e.to_string()))
}

pub fn ingest_sample(path: &Path) -> Result<OutputSample> {
    let rows = read_table(path, &["y"])?;
    OutputSample::new(rows.into_iter().map(|(_, r)| r[0]).collect()).map_err(|e| ingest_error(path, e.to_string()))
}

pub fn ingest_chain(path: &Path) -> Result<Vec<ChainNode>> {
    read_table(path, &["u", "ce"])?
        .into_iter()
        .map(|(row, r)| {
            ChainNode::new(r[0], r[1]).map_err(|e| Error::Row {
                path: path.display().to_string(),
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn ingest_metrics(path: &Path) -> Result<ProcessMetrics> {
    let rows = read_table(path, &["cpk", "pp", "sigma_d", "rate_d", "cv"])?;
    let [(row, r)] = rows.as_slice() else {
        return Err(ingest_error(path, format!("expected one data row, found {}", rows.len())));
    };
    ProcessMetrics::from_columns(r[0], r[1], r[2], r[3], Some(r[4])).map_err(|e| Error::Row {
        path: path.display().to_string(),
        row: *row,
        message: e.to_string(),
    })
}

/// Reads one case directory.
pub fn ingest_case(dir: &Path) -> Result<CaseRecord> {
    let meta_path = dir.join(CASE_META_FILE);
    let text = read_text(&meta_path)?;
    let (mut name, mut tt, mut model, mut metrics) = (None, None, None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Row {
                path: meta_path.display().to_string(),
                row: lineno,
                message: "expected 'key = value'".into(),
            });
        };
        let value = value.trim().to_string();
        match key.trim() {
            "name" => name = Some(value),
            "tt" => {
                tt = Some(value.parse::<f64>().map_err(|_| Error::Row {
                    path: meta_path.display().to_string(),
                    row: lineno,
                    message: format!("tt: '{value}' is not a number"),
                })?)
            }
            "model" => model = Some(PathBuf::from(value)),
            "metrics" => metrics = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Row {
                    path: meta_path.display().to_string(),
                    row: lineno,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    let missing = |key: &str| ingest_error(&meta_path, format!("missing key '{key}'"));
    let name = name.ok_or_else(|| missing("name"))?;
    let total_time = tt.ok_or_else(|| missing("tt"))?;
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(ingest_error(&meta_path, format!("tt must be positive, got {total_time}")));
    }
    let model = read_model(&dir.join(model.ok_or_else(|| missing("model"))?))?;
    let ingested_metrics = metrics.map(|p| ingest_metrics(&dir.join(p))).transpose()?;
    Ok(CaseRecord {
        name,
        model,
        total_time,
        ingested_metrics,
    })
}

/// Reads every subdirectory of `dir` that holds a `case.meta`, in name order.
pub fn ingest_cases(dir: &Path) -> Result<Vec<CaseRecord>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CASE_META_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(ingest_error(dir, format!("no case directories containing {CASE_META_FILE}")));
    }
    dirs.iter().map(|d| ingest_case(d)).collect()
}

/// `t,u,y` CSV text.
pub fn format_run_csv(input: &TimeSeries, output: &TimeSeries) -> Result<String> {
    if !input.same_grid(output) {
        return Err(Error::GridMismatch("input and output must share timestamps".into()));
    }
    let mut out = String::from("t,u,y\n");
    for ((t, u), (_, y)) in input.iter().zip(output.iter()) {
        out.push_str(&format!("{t},{u},{y}\n"));
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
