//! Ranking objectives: loss value plus gradient with respect to scores.
//!
//! | kind | family | loss |
//! |------|--------|------|
//! | `rank_mse` | pointwise | `sum_j (s_j - y_j)^2` |
//! | `ranknet` | pairwise | `sum_{y_j > y_s} log2(1 + exp(-sigma (s_j - s_s)))` |
//! | `lambdarank` | pairwise | RankNet terms weighted by `|dNDCG(j, s)|` |
//! | `listnet` | listwise | `-sum_j P_j ln Q_j`, `P = softmax(y)`, `Q = softmax(s)` |
//!
//! Pairwise losses are sums over pairs, not averages. LambdaRank swap weights
//! are computed from the ranking induced by the current scores over the full
//! list and treated as constants when differentiating.
//!
//! All kernels are generic over [`Real`] so the meta-trainer can push dual
//! numbers through them for Hessian-vector products.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{discount, gain, ideal_dcg_at_k, rank_by_scores};
use crate::scalar::{sigmoid, softplus, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    RankMse,
    RankNet { sigma: f64 },
    LambdaRank { sigma: f64 },
    ListNet,
}

impl LossKind {
    pub const DEFAULT_SIGMA: f64 = 1.0;

    /// Parses the config name, with an optional `sigma` for pairwise kinds.
    pub fn from_name(name: &str, sigma: Option<f64>) -> Result<Self> {
        let sigma_or_default = || {
            let s = sigma.unwrap_or(Self::DEFAULT_SIGMA);
            if s.is_finite() && s > 0.0 {
                Ok(s)
            } else {
                Err(Error::InvalidConfig(alloc::format!("sigma must be > 0, got {s}")))
            }
        };
        let kind = match name {
            "rank_mse" => Self::RankMse,
            "ranknet" => Self::RankNet {
                sigma: sigma_or_default()?,
            },
            "lambdarank" => Self::LambdaRank {
                sigma: sigma_or_default()?,
            },
            "listnet" => Self::ListNet,
            other => return Err(Error::Parse(alloc::format!("unknown loss {other:?}"))),
        };
        if sigma.is_some() && matches!(kind, Self::RankMse | Self::ListNet) {
            return Err(Error::InvalidConfig(alloc::format!("loss {name} takes no sigma")));
        }
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RankMse => "rank_mse",
            Self::RankNet { .. } => "ranknet",
            Self::LambdaRank { .. } => "lambdarank",
            Self::ListNet => "listnet",
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Self::RankNet { sigma } | Self::LambdaRank { sigma } => Some(sigma),
            _ => None,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s, None)
    }
}

/// Scores and graded labels of one list.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<u32>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if scores.is_empty() || scores.len() != labels.len() {
            return Err(Error::InvalidBatch(alloc::format!(
                "need equal non-zero lengths, got {} scores and {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidBatch("scores must be finite".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl From<(f64, Vec<f64>)> for LossValue {
    fn from((loss, grad): (f64, Vec<f64>)) -> Self {
        Self { loss, grad }
    }
}

pub fn rank_mse(batch: &LabeledScores) -> LossValue {
    rank_mse_kernel(&batch.scores, &batch.labels).into()
}

pub fn ranknet(batch: &LabeledScores, sigma: f64) -> LossValue {
    pairwise_kernel(&batch.scores, &batch.labels, sigma, false).into()
}

/// LambdaRank over the full list. A list with no relevant item has zero
/// ideal DCG; its loss and gradient are defined as zero.
pub fn lambdarank(batch: &LabeledScores, sigma: f64) -> LossValue {
    pairwise_kernel(&batch.scores, &batch.labels, sigma, true).into()
}

pub fn listnet(batch: &LabeledScores) -> LossValue {
    listnet_kernel(&batch.scores, &batch.labels).into()
}

pub fn evaluate(kind: &LossKind, batch: &LabeledScores) -> LossValue {
    loss_with_grad(kind, &batch.scores, &batch.labels).into()
}

/// Generic entry point used by the training code.
pub fn loss_with_grad<S: Real>(kind: &LossKind, scores: &[S], labels: &[u32]) -> (S, Vec<S>) {
    match *kind {
        LossKind::RankMse => rank_mse_kernel(scores, labels),
        LossKind::RankNet { sigma } => pairwise_kernel(scores, labels, sigma, false),
        LossKind::LambdaRank { sigma } => pairwise_kernel(scores, labels, sigma, true),
        LossKind::ListNet => listnet_kernel(scores, labels),
    }
}

fn rank_mse_kernel<S: Real>(scores: &[S], labels: &[u32]) -> (S, Vec<S>) {
    let mut loss = S::zero();
    let grad = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let r = s - S::from_f64(y as f64);
            loss += r * r;
            r.scale(2.0)
        })
        .collect();
    (loss, grad)
}

/// `|dNDCG|` for swapping every pair, from the ranking induced by `scores`.
/// Returns `None` when the ideal DCG is zero.
fn swap_weights(scores: &[f64], labels: &[u32]) -> Option<Vec<f64>> {
    let n = scores.len();
    let ideal = ideal_dcg_at_k(labels, n);
    if ideal == 0.0 {
        return None;
    }
    let mut position = vec![0usize; n];
    for (pos, idx) in rank_by_scores(scores).into_iter().enumerate() {
        position[idx] = pos;
    }
    let inv_disc: Vec<f64> = position.iter().map(|&p| 1.0 / discount(p)).collect();
    let gains: Vec<f64> = labels.iter().map(|&y| gain(y)).collect();
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for s in 0..n {
            w[j * n + s] = libm::fabs((gains[j] - gains[s]) * (inv_disc[j] - inv_disc[s])) / ideal;
        }
    }
    Some(w)
}

fn pairwise_kernel<S: Real>(scores: &[S], labels: &[u32], sigma: f64, lambda: bool) -> (S, Vec<S>) {
    let n = scores.len();
    let mut loss = S::zero();
    let mut grad = vec![S::zero(); n];
    let weights = if lambda {
        let primal: Vec<f64> = scores.iter().map(|s| s.value()).collect();
        match swap_weights(&primal, labels) {
            Some(w) => Some(w),
            None => return (loss, grad),
        }
    } else {
        None
    };
    let inv_ln2 = core::f64::consts::LOG2_E;
    for j in 0..n {
        for s in 0..n {
            if labels[j] <= labels[s] {
                continue;
            }
            let w = weights.as_ref().map_or(1.0, |w| w[j * n + s]);
            if w == 0.0 {
                continue;
            }
            let u = (scores[j] - scores[s]).scale(sigma);
            loss += softplus(-u).scale(w * inv_ln2);
            // d/du log2(1 + e^{-u}) = -sigmoid(-u) / ln 2
            let d = sigmoid(-u).scale(w * sigma * inv_ln2);
            grad[j] -= d;
            grad[s] += d;
        }
    }
    (loss, grad)
}

fn softmax_f64(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| libm::exp(x - m)).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn listnet_kernel<S: Real>(scores: &[S], labels: &[u32]) -> (S, Vec<S>) {
    let target = softmax_f64(&labels.iter().map(|&y| y as f64).collect::<Vec<_>>());
    let m = S::from_f64(scores.iter().map(|s| s.value()).fold(f64::NEG_INFINITY, f64::max));
    let mut z = S::zero();
    for &s in scores {
        z += (s - m).exp();
    }
    let log_z = m + z.ln();
    let mut loss = log_z;
    let grad = scores
        .iter()
        .zip(&target)
        .map(|(&s, &p)| {
            loss -= s.scale(p);
            (s - log_z).exp() - S::from_f64(p)
        })
        .collect();
    (loss, grad)
}
