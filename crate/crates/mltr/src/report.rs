//! Result tables.
//!
//! `results.csv` has the header
//! `arm,loss,train_profile,tuning_profile,seed,ndcg1,ndcg5,ndcg10,skipped,seconds`
//! with floats at 6 decimals; `results.jsonl` holds the same fields, one object
//! per line, at full precision.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const CSV_HEADER: &str = "arm,loss,train_profile,tuning_profile,seed,ndcg1,ndcg5,ndcg10,skipped,seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arm: String,
    pub loss: String,
    pub train_profile: String,
    pub tuning_profile: String,
    pub seed: u64,
    pub ndcg1: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    /// Test queries excluded from the means.
    pub skipped: usize,
    pub seconds: f64,
}

/// Paired two-tailed t-test of an arm against a baseline arm over per-query
/// NDCG@10, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub arm: String,
    pub baseline: String,
    pub loss: String,
    pub train_profile: String,
    pub tuning_profile: String,
    pub seeds: Vec<u64>,
    pub pairs: usize,
    pub mean_difference: f64,
    /// `None` when the differences have zero variance.
    pub t_statistic: Option<f64>,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub significant: bool,
}

/// One cell of the relative-improvement matrix: seed-averaged NDCG@10 of
/// `(arm, train_profile)` against the reference model on the same tuning
/// profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeCell {
    pub arm: String,
    pub train_profile: String,
    pub tuning_profile: String,
    pub ndcg10: f64,
    pub reference_ndcg10: f64,
    /// `(ndcg10 - reference) / reference`; `None` when the reference is 0.
    pub relative_improvement: Option<f64>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |e| AppError::io(format!("writing {}", path.display()), e)
}

/// CSV text of `rows`, header first.
pub fn write_csv<W: Write>(rows: &[ResultRow], sink: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.arm.clone(),
            r.loss.clone(),
            r.train_profile.clone(),
            r.tuning_profile.clone(),
            r.seed.to_string(),
            format!("{:.6}", r.ndcg1),
            format!("{:.6}", r.ndcg5),
            format!("{:.6}", r.ndcg10),
            r.skipped.to_string(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()
}

pub fn read_csv<R: std::io::Read>(src: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(src);
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| AppError::Data(format!("results csv: {e}")))
}

/// One JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(items: &[T], mut sink: W) -> std::io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut sink, it)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(src: R) -> Result<Vec<T>> {
    src.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| AppError::io("reading json-lines", e))?;
            serde_json::from_str(&l).map_err(|e| AppError::Data(format!("json-lines: {e}")))
        })
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| AppError::io(format!("creating {}", path.display()), e))
}

/// Writes `results.csv` and `results.jsonl` into `dir`.
pub fn emit_results(rows: &[ResultRow], dir: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(AppError::Data("no result rows to report".into()));
    }
    let csv_path = dir.join("results.csv");
    write_csv(rows, create(&csv_path)?).map_err(io(&csv_path))?;
    let json_path = dir.join("results.jsonl");
    write_jsonl(rows, create(&json_path)?).map_err(io(&json_path))
}

pub fn emit_significance(rows: &[SignificanceRow], dir: &Path) -> Result<()> {
    let path = dir.join("significance.jsonl");
    write_jsonl(rows, create(&path)?).map_err(io(&path))
}

pub fn emit_relative(cells: &[RelativeCell], dir: &Path) -> Result<()> {
    let path = dir.join("relative_improvement.jsonl");
    write_jsonl(cells, create(&path)?).map_err(io(&path))?;
    let path = dir.join("relative_improvement.csv");
    let mut w = create(&path)?;
    let mut body = String::from("arm,train_profile,tuning_profile,ndcg10,reference_ndcg10,relative_improvement\n");
    for c in cells {
        let rel = c.relative_improvement.map(|r| format!("{r:.6}")).unwrap_or_default();
        body.push_str(&format!(
            "{},{},{},{:.6},{:.6},{rel}\n",
            c.arm, c.train_profile, c.tuning_profile, c.ndcg10, c.reference_ndcg10
        ));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row() -> ResultRow {
        ResultRow {
            arm: "LTR+SMOTE".into(),
            loss: "ranknet".into(),
            train_profile: "p1n9".into(),
            tuning_profile: "p1n39".into(),
            seed: 7,
            ndcg1: 0.1 + 0.2,
            ndcg5: 2.0 / 3.0,
            ndcg10: 0.123456789012345,
            skipped: 4,
            seconds: 0.0,
        }
    }

    #[test]
    fn one_row_is_two_csv_lines() {
        let mut out = Vec::new();
        write_csv(&[row()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "LTR+SMOTE,ranknet,p1n9,p1n39,7,0.300000,0.666667,0.123457,4,0.000000");
    }

    #[test]
    fn csv_reparse_within_1e6() {
        let mut out = Vec::new();
        write_csv(&[row()], &mut out).unwrap();
        let back = read_csv(out.as_slice()).unwrap();
        let r = row();
        assert_eq!(back[0].arm, r.arm);
        for (a, b) in [(back[0].ndcg1, r.ndcg1), (back[0].ndcg5, r.ndcg5), (back[0].ndcg10, r.ndcg10)] {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn jsonl_reparse_is_exact() {
        let mut out = Vec::new();
        write_jsonl(&[row(), row()], &mut out).unwrap();
        let back: Vec<ResultRow> = read_jsonl(out.as_slice()).unwrap();
        assert_eq!(back, vec![row(), row()]);
    }
}
