//! Query-grouped ranking data.
//!
//! A [`Dataset`] is an ordered list of [`QueryGroup`]s; each group holds the
//! dense feature vectors and graded relevance labels of the documents retrieved
//! for one query. Feature vectors are 0-based and all share `feature_dims`.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub features: Vec<f64>,
    pub relevance: u32,
    /// Trailing free text from the source line (LETOR files carry the doc id here).
    pub comment: Option<String>,
}

impl Document {
    pub fn new(features: Vec<f64>, relevance: u32) -> Self {
        Self {
            features,
            relevance,
            comment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub documents: Vec<Document>,
}

impl QueryGroup {
    pub fn new(query_id: impl Into<String>, documents: Vec<Document>) -> Self {
        Self {
            query_id: query_id.into(),
            documents,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.documents.iter().map(|d| d.relevance).collect()
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        self.indices_where(true)
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        self.indices_where(false)
    }

    fn indices_where(&self, positive: bool) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| label_is_positive(d.relevance) == positive)
            .map(|(i, _)| i)
            .collect()
    }

    /// Feature rows and labels for a subset of documents, in subset order.
    pub fn select(&self, indices: &[usize]) -> (Vec<&[f64]>, Vec<u32>) {
        indices
            .iter()
            .map(|&i| {
                let d = &self.documents[i];
                (d.features.as_slice(), d.relevance)
            })
            .unzip()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_dims: usize,
    pub queries: Vec<QueryGroup>,
}

/// A document counts as relevant iff its grade is above zero.
#[inline]
pub fn label_is_positive(relevance: u32) -> bool {
    relevance > 0
}

impl Dataset {
    /// Builds a dataset and checks its invariants: unique query ids, non-empty
    /// groups, uniform finite feature vectors of width `feature_dims`.
    pub fn new(name: impl Into<String>, feature_dims: usize, queries: Vec<QueryGroup>) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            feature_dims,
            queries,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for q in &self.queries {
            if q.query_id.is_empty() {
                return Err(Error::InvalidDataset("empty query id".into()));
            }
            if !seen.insert(q.query_id.as_str()) {
                return Err(Error::InvalidDataset(alloc::format!(
                    "duplicate query id {}",
                    q.query_id
                )));
            }
            if q.documents.is_empty() {
                return Err(Error::InvalidDataset(alloc::format!(
                    "query {} has no documents",
                    q.query_id
                )));
            }
            for d in &q.documents {
                if d.features.len() != self.feature_dims {
                    return Err(Error::DimensionMismatch {
                        expected: self.feature_dims,
                        actual: d.features.len(),
                    });
                }
                if d.features.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDataset(alloc::format!(
                        "query {} has a non-finite feature",
                        q.query_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_documents(&self) -> usize {
        self.queries.iter().map(QueryGroup::len).sum()
    }

    pub fn num_positives(&self) -> usize {
        self.queries
            .iter()
            .flat_map(|q| &q.documents)
            .filter(|d| label_is_positive(d.relevance))
            .count()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn subset(&self, suffix: &str, indices: &[usize]) -> Dataset {
        Dataset {
            name: alloc::format!("{}/{}", self.name, suffix),
            feature_dims: self.feature_dims,
            queries: indices.iter().map(|&i| self.queries[i].clone()).collect(),
        }
    }
}

/// Query-level split fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.8,
        validation: 0.1,
        test: 0.1,
    };

    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self {
            train,
            validation,
            test,
        };
        let parts = [train, validation, test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || libm::fabs(train + validation + test - 1.0) > 1e-9 {
            return Err(Error::InvalidConfig(alloc::format!(
                "split ratios must be non-negative and sum to 1, got {train}/{validation}/{test}"
            )));
        }
        Ok(r)
    }

    /// Part sizes for `n` queries: validation and test are floored, the
    /// remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = libm::floor(n as f64 * self.validation) as usize;
        let test = libm::floor(n as f64 * self.test) as usize;
        let train = n.saturating_sub(val + test);
        (train, val, test)
    }
}

/// Partitions queries into train/validation/test. No query appears in two
/// parts; each part keeps the original query order.
pub fn split_by_query(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let n = dataset.queries.len();
    let (n_train, n_val, n_test) = ratios.sizes(n);
    if n < 3 || n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InsufficientQueries { queries: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::stream(seed, &[seeding::tag::SPLIT]));

    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_val].to_vec(),
        order[n_train + n_val..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok((
        dataset.subset("train", &parts[0]),
        dataset.subset("validation", &parts[1]),
        dataset.subset("test", &parts[2]),
    ))
}

/// Per-query, per-dimension min-max scaling to `[0, 1]`. Dimensions that are
/// constant within a query map to `0.0`.
pub fn normalize_features(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    for q in &mut out.queries {
        for dim in 0..out.feature_dims {
            let (lo, hi) = q.documents.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                let v = d.features[dim];
                (lo.min(v), hi.max(v))
            });
            let range = hi - lo;
            for d in &mut q.documents {
                d.features[dim] = if range > 0.0 {
                    (d.features[dim] - lo) / range
                } else {
                    0.0
                };
            }
        }
    }
    out
}

/// Summary statistics in the shape of a corpus description table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub queries: usize,
    /// Distinct document ids, when every document carries one in its comment.
    pub items: Option<usize>,
    pub pairs: usize,
    pub positives: usize,
    pub feature_dims: usize,
    pub min_grade: u32,
    pub max_grade: u32,
}

impl CorpusStats {
    pub fn positive_rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.positives as f64 / self.pairs as f64
        }
    }
}

/// Extracts a document id from a LETOR-style comment
/// (`docid = GX000-00-0000000 inc = 1 prob = 0.0`), falling back to the first token.
pub fn doc_id_from_comment(comment: &str) -> Option<&str> {
    let mut tokens = comment.split_whitespace();
    let first = tokens.next()?;
    if first == "docid" {
        let next = tokens.next()?;
        if next == "=" {
            return tokens.next();
        }
        return next.strip_prefix('=').filter(|s| !s.is_empty()).or(Some(next));
    }
    if let Some(rest) = first.strip_prefix("docid=") {
        if !rest.is_empty() {
            return Some(rest);
        }
    }
    Some(first)
}

pub fn corpus_stats(dataset: &Dataset) -> CorpusStats {
    let mut ids: BTreeSet<String> = BTreeSet::new();
    let mut all_ids = true;
    let mut min_grade = u32::MAX;
    let mut max_grade = 0;
    for d in dataset.queries.iter().flat_map(|q| &q.documents) {
        min_grade = min_grade.min(d.relevance);
        max_grade = max_grade.max(d.relevance);
        match d.comment.as_deref().and_then(doc_id_from_comment) {
            Some(id) => {
                ids.insert(id.to_string());
            }
            None => all_ids = false,
        }
    }
    let pairs = dataset.num_documents();
    CorpusStats {
        queries: dataset.queries.len(),
        items: (all_ids && pairs > 0).then_some(ids.len()),
        pairs,
        positives: dataset.num_positives(),
        feature_dims: dataset.feature_dims,
        min_grade: if pairs == 0 { 0 } else { min_grade },
        max_grade,
    }
}
