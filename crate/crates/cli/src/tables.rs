//! CSV output. Every file starts with a header row; absent optional values
//! are empty fields.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use lagflow::{EvalReport, PointBatch, TrainRecord};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `step,loss,elapsed_seconds`, plus `w2,npe` when `with_eval`.
pub fn write_train_log(path: &Path, records: &[TrainRecord], with_eval: bool) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["step", "loss", "elapsed_seconds"];
    if with_eval {
        header.extend(["w2", "npe"]);
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.step.to_string(), r.loss.to_string(), r.elapsed_seconds.to_string()];
        if with_eval {
            row.push(opt(r.eval.as_ref().map(|e| e.w2)));
            row.push(opt(r.eval.as_ref().and_then(|e| e.npe)));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Header `x0,…,x{d−1}`, one point per row.
pub fn write_points(path: &Path, dim: usize, points: &PointBatch) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record((0..dim).map(|k| format!("x{k}")))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_points(path: &Path) -> Result<PointBatch> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        for field in rec?.iter() {
            data.push(field.parse::<f64>().map_err(|e| {
                crate::CliError::Usage(format!("{}: bad number `{field}`: {e}", path.display()))
            })?);
        }
    }
    Ok(PointBatch::new(dim, data)?)
}

/// Long format `t,point,x0,…` for recorded solver states.
pub fn write_trajectories(path: &Path, times: &[f64], states: &[PointBatch]) -> Result<()> {
    let mut w = writer(path)?;
    let dim = states.first().map_or(0, |s| s.dim());
    let mut header = vec!["t".to_string(), "point".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (t, s) in times.iter().zip(states) {
        for (i, row) in s.rows().enumerate() {
            let mut rec = vec![t.to_string(), i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// `eval.csv`: the report header followed by one row per report.
pub fn write_eval(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut f = File::create(path).map_err(io_err(path))?;
    let mut text = String::from(EvalReport::CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub seed: u64,
    pub method: String,
    pub w2: f64,
    pub npe: Option<f64>,
    pub coupling_excess: Option<f64>,
    pub path_excess: Option<f64>,
    pub nfe: usize,
}

/// Mean and sample standard deviation over seeds for one (value, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub method: String,
    pub runs: usize,
    pub w2_mean: f64,
    pub w2_std: f64,
    pub npe_mean: Option<f64>,
    pub npe_std: Option<f64>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (value, method) in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, &str)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(v, m)| v == r.value && m == r.method) {
            keys.push((r.value, &r.method));
        }
    }
    keys.into_iter()
        .map(|(value, method)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.value == value && r.method == method)
                .collect();
            let w2: Vec<f64> = group.iter().map(|r| r.w2).collect();
            let npe: Vec<f64> = group.iter().filter_map(|r| r.npe).collect();
            let (w2_mean, w2_std) = mean_std(&w2);
            let (npe_mean, npe_std) = if npe.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&npe);
                (Some(m), Some(s))
            };
            SummaryRow {
                axis: group[0].axis.clone(),
                value,
                method: method.to_string(),
                runs: group.len(),
                w2_mean,
                w2_std,
                npe_mean,
                npe_std,
            }
        })
        .collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
