//! DCG/NDCG and model-level ranking reports.
//!
//! Gain is `2^rel - 1` and the discount for 1-based rank `i` is `log2(i + 1)`.
//! LambdaRank's swap weights use the same two functions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::ranker::{self, ParameterVector};
use crate::sampling::FinetuneSplit;

#[inline]
pub fn gain(relevance: u32) -> f64 {
    libm::exp2(relevance as f64) - 1.0
}

/// Discount for 0-based position `pos`: `log2(pos + 2)`.
#[inline]
pub fn discount(pos: usize) -> f64 {
    libm::log2(pos as f64 + 2.0)
}

pub fn dcg_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    ranked_labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / discount(i))
        .sum()
}

pub fn ideal_dcg_at_k(labels: &[u32], k: usize) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_k(&sorted, k)
}

/// NDCG@k of labels listed in ranked order; 0 when no item is relevant.
pub fn ndcg_at_k(ranked_labels: &[u32], k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(ranked_labels, k);
    if ideal == 0.0 {
        return 0.0;
    }
    dcg_at_k(ranked_labels, k) / ideal
}

/// Indices sorted by descending score; ties keep ascending index order.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    /// NDCG at each cutoff of [`RankingMetrics::ks`].
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingMetrics {
    pub ks: Vec<usize>,
    /// Evaluable queries in dataset order.
    pub per_query: Vec<QueryMetrics>,
    /// Mean over `per_query`, one entry per cutoff.
    pub mean: Vec<f64>,
    /// Queries with an empty eval set, no relevant eval item, or no split.
    pub skipped: usize,
}

impl RankingMetrics {
    pub fn mean_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean[i])
    }

    /// Per-query NDCG at cutoff `k`, in `per_query` order.
    pub fn column(&self, k: usize) -> Option<Vec<f64>> {
        let i = self.ks.iter().position(|&x| x == k)?;
        Some(self.per_query.iter().map(|q| q.ndcg[i]).collect())
    }
}

/// Evaluation sets for a dataset: `splits[i]` belongs to `dataset.queries[i]`,
/// `None` when the query could not be split.
pub type EvalSets<'a> = &'a [Option<FinetuneSplit>];

/// Scores every query's eval items with `params_for(query index)` and
/// aggregates NDCG@k by unweighted mean over evaluable queries.
pub fn evaluate_with<'p, F>(dataset: &Dataset, splits: EvalSets<'_>, ks: &[usize], mut params_for: F) -> RankingMetrics
where
    F: FnMut(usize) -> &'p ParameterVector,
{
    let mut per_query = Vec::new();
    let mut skipped = 0;
    for (qi, (group, split)) in dataset.queries.iter().zip(splits).enumerate() {
        let Some(split) = split else {
            skipped += 1;
            continue;
        };
        let labels: Vec<u32> = split.eval.iter().map(|&i| group.documents[i].relevance).collect();
        if split.eval.is_empty() || labels.iter().all(|&r| r == 0) {
            skipped += 1;
            continue;
        }
        let params = params_for(qi);
        let scores: Vec<f64> = split
            .eval
            .iter()
            .map(|&i| ranker::score_unchecked(params.shape(), params.values(), &group.documents[i].features))
            .collect();
        let ranked: Vec<u32> = rank_by_scores(&scores).into_iter().map(|i| labels[i]).collect();
        per_query.push(QueryMetrics {
            query_id: group.query_id.clone(),
            ndcg: ks.iter().map(|&k| ndcg_at_k(&ranked, k)).collect(),
        });
    }
    let mean = (0..ks.len())
        .map(|j| {
            if per_query.is_empty() {
                0.0
            } else {
                per_query.iter().map(|q| q.ndcg[j]).sum::<f64>() / per_query.len() as f64
            }
        })
        .collect();
    RankingMetrics {
        ks: ks.to_vec(),
        per_query,
        mean,
        skipped,
    }
}

/// [`evaluate_with`] for a single shared parameter vector.
pub fn evaluate_model(params: &ParameterVector, dataset: &Dataset, splits: EvalSets<'_>, ks: &[usize]) -> RankingMetrics {
    evaluate_with(dataset, splits, ks, |_| params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ideal_order_scores_one() {
        for k in 1..6 {
            assert_eq!(ndcg_at_k(&[3, 2, 2, 1, 0], k), 1.0);
        }
    }

    #[test]
    fn no_relevant_items_scores_zero() {
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3), 0.0);
    }

    #[test]
    fn two_item_reference_value() {
        // DCG = 3/1 + 7/log2(3), IDCG = 7/1 + 3/log2(3)
        let v = ndcg_at_k(&[2, 3], 2);
        let dcg = 3.0 + 7.0 / libm::log2(3.0);
        let idcg = 7.0 + 3.0 / libm::log2(3.0);
        assert!((dcg - 7.41650).abs() < 1e-5);
        assert!((idcg - 8.89279).abs() < 1e-5);
        assert!((v - 0.83399).abs() < 1e-5);
    }

    #[test]
    fn cutoff_beyond_length() {
        assert_eq!(ndcg_at_k(&[0, 1], 10), ndcg_at_k(&[0, 1], 2));
    }

    #[test]
    fn rank_ties_and_orders() {
        assert_eq!(rank_by_scores(&[3.0, 2.0, 1.0]), vec![0, 1, 2]);
        assert_eq!(rank_by_scores(&[1.0, 1.0, 1.0]), vec![0, 1, 2]);
        assert_eq!(rank_by_scores(&[1.0, 2.0, 3.0]), vec![2, 1, 0]);
        assert_eq!(rank_by_scores(&[0.0, 5.0, 0.0, 5.0]), vec![1, 3, 0, 2]);
    }
}
