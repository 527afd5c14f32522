use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Run;

/// Pass/fail of one criterion, embedded in `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub pass: bool,
    pub value: f64,
    pub target: String,
}

impl Verdict {
    pub fn new(criterion: impl Into<String>, pass: bool, value: f64, target: impl Into<String>) -> Self {
        Verdict { criterion: criterion.into(), pass, value, target: target.into() }
    }
}

/// Everything an experiment produces.
#[derive(Debug, Default)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    /// `(file name, svg)`.
    pub plots: Vec<(String, String)>,
    /// Additional CSV files, `(file name, contents)`.
    pub extra: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(header: Vec<&'static str>) -> Self {
        Report { header, ..Default::default() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }
}

/// Converts the arguments to a CSV row.
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}
pub(crate) use row;

/// Compact number formatting for console lines and axis labels.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.2e}")
    }
}

pub fn write_resolved(run: &Run, params: &impl Serialize) -> Result<()> {
    fs::create_dir_all(&run.out).with_context(|| format!("creating output directory {}", run.out.display()))?;
    let resolved = json!({
        "experiment": run.experiment,
        "seed": run.seed,
        "out": run.out,
        "workers": run.workers,
        "params": params,
    });
    write(&run.out.join("resolved-config.json"), serde_json::to_vec_pretty(&resolved)?)
}

pub fn write_report(run: &Run, report: &Report) -> Result<()> {
    let mut w = csv::Writer::from_path(run.out.join("results.csv")).context("opening results.csv")?;
    w.write_record(&report.header)?;
    for r in &report.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    let summary = json!({
        "experiment": run.experiment,
        "seed": run.seed,
        "all_pass": report.verdicts.iter().all(|v| v.pass),
        "verdicts": report.verdicts,
        "results": report.results,
    });
    write(&run.out.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    for (name, svg) in &report.plots {
        write(&run.out.join(name), svg.as_bytes().to_vec())?;
    }
    for (name, bytes) in &report.extra {
        write(&run.out.join(name), bytes.clone())?;
    }
    Ok(())
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
