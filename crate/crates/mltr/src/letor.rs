//! LETOR / SVM-light ranking files.
//!
//! One document per line:
//!
//! ```text
//! <label> qid:<id> <index>:<value> ... [# comment]
//! ```
//!
//! Feature indices are 1-based on disk and become 0-based positions of a
//! dense vector; missing indices are 0. Blank lines are ignored. Lines of one
//! query need not be contiguous: groups keep the order in which their query id
//! first appears, and documents keep file order within a group.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use mltr_core::{Dataset, Document, QueryGroup};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LetorError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: feature index {index} exceeds the expected {expected} dimensions")]
    DimensionMismatch { line: usize, index: usize, expected: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Dataset(#[from] mltr_core::Error),
}

/// One parsed line, features still sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub relevance: u32,
    pub query_id: String,
    /// `(1-based index, value)` in file order.
    pub features: Vec<(usize, f64)>,
    pub comment: Option<String>,
}

fn malformed(line: usize, reason: impl Into<String>) -> LetorError {
    LetorError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// Parses one non-blank line. `line` is the 1-based line number for errors.
pub fn parse_record(text: &str, line: usize) -> Result<RawRecord, LetorError> {
    let (body, comment) = match text.split_once('#') {
        Some((b, c)) => (b, Some(c.trim()).filter(|c| !c.is_empty()).map(str::to_string)),
        None => (text, None),
    };
    let mut tokens = body.split_whitespace();

    let label = tokens.next().ok_or_else(|| malformed(line, "missing label"))?;
    let relevance = label
        .parse::<u32>()
        .map_err(|_| malformed(line, format!("label {label:?} is not a non-negative integer")))?;

    let qid = tokens.next().ok_or_else(|| malformed(line, "missing qid"))?;
    let query_id = qid
        .strip_prefix("qid:")
        .filter(|q| !q.is_empty())
        .ok_or_else(|| malformed(line, format!("expected qid:<id>, found {qid:?}")))?
        .to_string();

    let mut features = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| malformed(line, format!("expected <index>:<value>, found {tok:?}")))?;
        let index = idx
            .parse::<usize>()
            .map_err(|_| malformed(line, format!("feature index {idx:?} is not a positive integer")))?;
        if index == 0 {
            return Err(malformed(line, "feature indices start at 1"));
        }
        let value = val
            .parse::<f64>()
            .map_err(|_| malformed(line, format!("feature value {val:?} is not numeric")))?;
        if !value.is_finite() {
            return Err(malformed(line, format!("feature {index} is not finite")));
        }
        if !seen.insert(index) {
            return Err(malformed(line, format!("duplicate feature index {index}")));
        }
        features.push((index, value));
    }
    Ok(RawRecord {
        relevance,
        query_id,
        features,
        comment,
    })
}

/// Reads a whole stream into a dataset. Dense width is `expected_dims` when
/// given, otherwise the largest index present.
pub fn parse_dataset<R: BufRead>(reader: R, expected_dims: Option<usize>, name: &str) -> Result<Dataset, LetorError> {
    let mut records = Vec::new();
    let mut max_index = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line, i + 1)?;
        if let Some(&(index, _)) = rec.features.iter().max_by_key(|(idx, _)| *idx) {
            if let Some(expected) = expected_dims {
                if index > expected {
                    return Err(LetorError::DimensionMismatch {
                        line: i + 1,
                        index,
                        expected,
                    });
                }
            }
            max_index = max_index.max(index);
        }
        records.push(rec);
    }
    let dims = expected_dims.unwrap_or(max_index);

    let mut order: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<QueryGroup> = Vec::new();
    for rec in records {
        let mut features = vec![0.0; dims];
        for (index, value) in rec.features {
            features[index - 1] = value;
        }
        let doc = Document {
            features,
            relevance: rec.relevance,
            comment: rec.comment,
        };
        let slot = *order.entry(rec.query_id.clone()).or_insert_with(|| {
            groups.push(QueryGroup::new(rec.query_id, Vec::new()));
            groups.len() - 1
        });
        groups[slot].documents.push(doc);
    }
    Ok(Dataset::new(name, dims, groups)?)
}

/// Writes every feature of every document (zeros included) with the shortest
/// decimal form that parses back to the same value.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut sink: W) -> std::io::Result<()> {
    for q in &dataset.queries {
        for d in &q.documents {
            write!(sink, "{} qid:{}", d.relevance, q.query_id)?;
            for (i, v) in d.features.iter().enumerate() {
                write!(sink, " {}:{}", i + 1, v)?;
            }
            if let Some(c) = &d.comment {
                write!(sink, " # {c}")?;
            }
            writeln!(sink)?;
        }
    }
    sink.flush()
}

pub fn read_file(path: &std::path::Path, expected_dims: Option<usize>) -> Result<Dataset, LetorError> {
    let file = std::fs::File::open(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    parse_dataset(std::io::BufReader::new(file), expected_dims, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, dims: Option<usize>) -> Result<Dataset, LetorError> {
        parse_dataset(text.as_bytes(), dims, "t")
    }

    #[test]
    fn documented_line() {
        let r = parse_record("2 qid:10 1:0.5 3:1.0 # GX001", 1).unwrap();
        assert_eq!(r.relevance, 2);
        assert_eq!(r.query_id, "10");
        assert_eq!(r.features, vec![(1, 0.5), (3, 1.0)]);
        assert_eq!(r.comment.as_deref(), Some("GX001"));
    }

    #[test]
    fn grammar_violations() {
        for bad in ["1 1:0.5", "x qid:1 1:0.5", "-1 qid:1", "1 qid: 1:2", "1 qid:1 0:1.0", "1 qid:1 2:abc", "1 qid:1 2", "1 qid:1 1:NaN", "1 qid:1 1:inf", "1 qid:1 1:1 1:2"] {
            assert!(matches!(parse_record(bad, 7), Err(LetorError::MalformedLine { line: 7, .. })), "{bad}");
        }
    }

    #[test]
    fn dense_width_and_dimension_errors() {
        let d = parse("0 qid:a 2:1.5\n1 qid:a 1:1e-3\n", None).unwrap();
        assert_eq!(d.feature_dims, 2);
        assert_eq!(d.queries[0].documents[0].features, vec![0.0, 1.5]);
        assert_eq!(d.queries[0].documents[1].features, vec![0.001, 0.0]);
        assert_eq!(parse("0 qid:a 2:1.5\n", Some(4)).unwrap().feature_dims, 4);
        assert!(matches!(parse("0 qid:a 5:1.5\n", Some(4)), Err(LetorError::DimensionMismatch { line: 1, index: 5, expected: 4 })));
    }

    #[test]
    fn interleaved_queries_group_in_first_appearance_order() {
        let d = parse("0 qid:b 1:1\n\n1 qid:a 1:2\n2 qid:b 1:3\n", None).unwrap();
        let ids: Vec<_> = d.queries.iter().map(|q| q.query_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(d.queries[0].labels(), vec![0, 2]);
    }

    #[test]
    fn empty_and_single_record() {
        let empty = parse("", None).unwrap();
        let mut out = Vec::new();
        write_dataset(&empty, &mut out).unwrap();
        assert!(out.is_empty());

        let one = parse("3 qid:q7 1:0.1 2:-2.5e-7 # docid = X inc = 1", None).unwrap();
        let mut out = Vec::new();
        write_dataset(&one, &mut out).unwrap();
        assert_eq!(parse(std::str::from_utf8(&out).unwrap(), None).unwrap(), one);
    }
}
