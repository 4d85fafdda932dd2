//! Summary table of a run directory: normal and final attacked PE per method.
//! Missing artifacts show up as an explicit gap marker, never as zero.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const METHODS: [&str; 4] = ["Optimal", "RoNet", "R-REG", "L-REG"];
pub const GAP: &str = "n/a";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: &'static str,
    pub normal: Option<f64>,
    pub final_attacked: Option<f64>,
}

fn read_rows(path: &Path) -> Result<Option<Vec<HashMap<String, String>>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(header.iter().map(str::to_string).zip(rec.iter().map(str::to_string)).collect());
    }
    Ok(Some(rows))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        reason: e.to_string(),
    }
}

fn cell(row: &HashMap<String, String>, key: &str) -> Option<f64> {
    row.get(key)?.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Collects the table from `performance.csv`, falling back to the last row of
/// `normal_training.csv` for the baselines' normal column.
pub fn summarize(run_dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows: Vec<SummaryRow> = METHODS
        .iter()
        .map(|&method| SummaryRow {
            method,
            normal: None,
            final_attacked: None,
        })
        .collect();
    if let Some(perf) = read_rows(&run_dir.join("performance.csv"))? {
        for r in &perf {
            if let Some(row) = rows.iter_mut().find(|x| Some(x.method) == r.get("method").map(String::as_str)) {
                row.normal = cell(r, "normal_pe");
                row.final_attacked = cell(r, "final_attacked_pe");
            }
        }
    }
    if let Some(curve) = read_rows(&run_dir.join("normal_training.csv"))? {
        if let Some(last) = curve.last() {
            for (method, key) in [("Optimal", "pe_optimal"), ("R-REG", "pe_rreg"), ("L-REG", "pe_lreg")] {
                let row = rows.iter_mut().find(|x| x.method == method).expect("known method");
                if row.normal.is_none() {
                    row.normal = cell(last, key);
                }
            }
        }
    }
    Ok(rows)
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| GAP.to_string(), |x| format!("{x:.4}"))
}

pub fn render_text(rows: &[SummaryRow]) -> String {
    let mut out = format!("{:<10} {:>20} {:>26}\n", "Method", "Normal Performance", "Final Attacked Performance");
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:>20} {:>26}\n",
            r.method,
            show(r.normal),
            show(r.final_attacked)
        ));
    }
    out
}

pub fn render_csv(rows: &[SummaryRow]) -> String {
    let full = |v: Option<f64>| v.map_or_else(|| GAP.to_string(), |x| format!("{x}"));
    let mut out = String::from("method,normal_pe,final_attacked_pe\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.method, full(r.normal), full(r.final_attacked)));
    }
    out
}

/// Writes `summary.txt` and `summary.csv` into `run_dir`; returns the text table.
pub fn write_report(run_dir: &Path) -> Result<String> {
    let rows = summarize(run_dir)?;
    let text = render_text(&rows);
    fs::create_dir_all(run_dir)?;
    fs::write(run_dir.join("summary.txt"), &text)?;
    fs::write(run_dir.join("summary.csv"), render_csv(&rows))?;
    Ok(text)
}
