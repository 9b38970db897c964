//! CSV benchmark reports and their aggregate summary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bench::{BenchRow, Method};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CSV_HEADER: [&str; 15] = [
    "method", "graph", "N", "P", "theta", "L", "phi", "eta", "seed", "re_x", "re_g", "acc", "kappa", "seconds", "iters",
];

/// 17 significant digits: enough to parse back the same bits.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Report {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn rows_to_csv(rows: &[BenchRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let sink = Path::new("<memory>");
    w.write_record(CSV_HEADER).map_err(|e| csv_err(sink, e))?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.graph.clone(),
            r.n.to_string(),
            r.p.to_string(),
            float(r.theta),
            r.l.to_string(),
            float(r.phi),
            float(r.eta),
            r.seed.to_string(),
            float(r.re_x),
            float(r.re_g),
            float(r.acc),
            float(r.kappa),
            float(r.seconds),
            r.iters.to_string(),
        ])
        .map_err(|e| csv_err(sink, e))?;
    }
    w.into_inner().map_err(|e| Error::Report {
        path: sink.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn write_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    write_atomic(path, &rows_to_csv(rows)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_slice());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Report {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: Method,
    pub graph: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub eta: f64,
    pub count: usize,
    pub re_x: Stat,
    pub re_g: Stat,
    pub acc: Stat,
    pub seconds: Stat,
    pub iters: Stat,
}

/// Group by (method, graph, N, P, eta), in order of first appearance.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryEntry> {
    fn key(o: &BenchRow) -> (Method, &str, usize, usize, u64) {
        (o.method, o.graph.as_str(), o.n, o.p, o.eta.to_bits())
    }
    let mut groups: Vec<(&BenchRow, Vec<&BenchRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(first, _)| key(first) == key(r)) {
            Some((_, members)) => members.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(first, members)| {
            let col = |f: fn(&BenchRow) -> f64| Stat::of(&members.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryEntry {
                method: first.method,
                graph: first.graph.clone(),
                n: first.n,
                p: first.p,
                eta: first.eta,
                count: members.len(),
                re_x: col(|r| r.re_x),
                re_g: col(|r| r.re_g),
                acc: col(|r| r.acc),
                seconds: col(|r| r.seconds),
                iters: col(|r| r.iters as f64),
            }
        })
        .collect()
}
