//! Sparse-label simulation and episodic samplers.
//!
//! A [`SparsityProfile`] `pXnY` keeps `X` relevant and `Y` non-relevant
//! documents per query. Meta-training episodes draw one subset per inner step
//! according to a [`SamplingStrategy`] plus a test subset that never overlaps
//! the final inner step's subset. Evaluation splits keep a `pXnY` tuning subset
//! and evaluate on everything else.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::dataset::QueryGroup;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparsityProfile {
    pub positives: usize,
    pub negatives: usize,
}

impl SparsityProfile {
    pub fn new(positives: usize, negatives: usize) -> Result<Self> {
        if positives == 0 || negatives == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "sparsity profile needs p >= 1 and n >= 1, got p{positives}n{negatives}"
            )));
        }
        Ok(Self { positives, negatives })
    }

    /// Items per sampled subset (`K`).
    pub fn total(&self) -> usize {
        self.positives + self.negatives
    }

    /// Negatives per positive; larger is sparser.
    pub fn sparsity(&self) -> f64 {
        self.negatives as f64 / self.positives as f64
    }
}

impl fmt::Display for SparsityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}n{}", self.positives, self.negatives)
    }
}

impl FromStr for SparsityProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(alloc::format!("invalid sparsity profile {s:?}, expected e.g. \"p1n9\""));
        let rest = s.strip_prefix('p').ok_or_else(bad)?;
        let (p, n) = rest.split_once('n').ok_or_else(bad)?;
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(p) || !digits(n) {
            return Err(bad());
        }
        let p = p.parse().map_err(|_| bad())?;
        let n = n.parse().map_err(|_| bad())?;
        Self::new(p, n)
    }
}

/// How the per-step training subsets of an episode are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// One `pXnY` subset shared by every inner step.
    Fixed,
    /// A fresh subset each step with exactly one positive and `K - 1` negatives.
    OnePositive,
    /// A fresh subset each step with the given number of positives.
    MultiplePositive(usize),
}

impl SamplingStrategy {
    /// `(positives, negatives)` drawn for each inner step.
    pub fn step_counts(&self, profile: SparsityProfile) -> Result<(usize, usize)> {
        let k = profile.total();
        let pos = match *self {
            SamplingStrategy::Fixed => return Ok((profile.positives, profile.negatives)),
            SamplingStrategy::OnePositive => 1,
            SamplingStrategy::MultiplePositive(m) => m,
        };
        if pos == 0 || pos >= k {
            return Err(Error::InvalidConfig(alloc::format!(
                "strategy {self} incompatible with profile {profile}"
            )));
        }
        Ok((pos, k - pos))
    }

    pub fn resamples_each_step(&self) -> bool {
        !matches!(self, SamplingStrategy::Fixed)
    }

    /// Minimum `(positives, negatives)` a query needs so that an episode can
    /// be drawn: the final step's subset plus a disjoint test subset.
    pub fn episode_requirements(&self, profile: SparsityProfile) -> Result<(usize, usize)> {
        let (sp, sn) = self.step_counts(profile)?;
        Ok((sp + profile.positives, sn + profile.negatives))
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingStrategy::Fixed => f.write_str("fixed"),
            SamplingStrategy::OnePositive => f.write_str("one_positive"),
            SamplingStrategy::MultiplePositive(m) => write!(f, "multiple_positive:{m}"),
        }
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "one_positive" => Ok(Self::OnePositive),
            _ => s
                .strip_prefix("multiple_positive:")
                .and_then(|m| m.parse().ok())
                .filter(|&m: &usize| m >= 1)
                .map(Self::MultiplePositive)
                .ok_or_else(|| Error::Parse(alloc::format!("unknown sampling strategy {s:?}"))),
        }
    }
}

/// Sampled train subsets (one per inner step) and the test subset of one
/// meta-training task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub query_id: String,
    pub train_steps: Vec<Vec<usize>>,
    pub test_items: Vec<usize>,
}

impl Episode {
    pub fn final_train(&self) -> &[usize] {
        self.train_steps.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Tuning subset and the evaluation remainder of one held-out query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinetuneSplit {
    pub query_id: String,
    pub tuning: Vec<usize>,
    pub eval: Vec<usize>,
}

impl FinetuneSplit {
    /// A split whose eval part is empty cannot be scored and is excluded
    /// from metric averages.
    pub fn has_empty_eval(&self) -> bool {
        self.eval.is_empty()
    }
}

fn insufficient(group: &QueryGroup, needed_pos: usize, needed_neg: usize, pos: usize, neg: usize) -> Error {
    Error::InsufficientItems {
        query_id: group.query_id.to_string(),
        needed_pos,
        needed_neg,
        pos,
        neg,
    }
}

fn choose<R: Rng + ?Sized>(pool: &[usize], amount: usize, rng: &mut R, out: &mut Vec<usize>) {
    let picked = rand::seq::index::sample(rng, pool.len(), amount);
    out.extend(picked.iter().map(|i| pool[i]));
}

fn sample_from_pools<R: Rng + ?Sized>(
    group: &QueryGroup,
    pos_pool: &[usize],
    neg_pool: &[usize],
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pos_pool.len() < p || neg_pool.len() < n {
        return Err(insufficient(group, p, n, pos_pool.len(), neg_pool.len()));
    }
    let mut out = Vec::with_capacity(p + n);
    choose(pos_pool, p, rng, &mut out);
    choose(neg_pool, n, rng, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Uniformly samples `p` positive and `n` negative document indices without
/// replacement. Indices come back in ascending document order.
pub fn sample_pn<R: Rng + ?Sized>(group: &QueryGroup, profile: SparsityProfile, rng: &mut R) -> Result<Vec<usize>> {
    sample_from_pools(
        group,
        &group.positive_indices(),
        &group.negative_indices(),
        profile.positives,
        profile.negatives,
        rng,
    )
}

/// Whether `group` has enough items for a meta-training episode.
pub fn episode_feasible(group: &QueryGroup, profile: SparsityProfile, strategy: SamplingStrategy) -> Result<bool> {
    let (need_p, need_n) = strategy.episode_requirements(profile)?;
    let pos = group.documents.iter().filter(|d| d.relevance > 0).count();
    Ok(pos >= need_p && group.len() - pos >= need_n)
}

/// Draws the per-step training subsets and the test subset of one task.
///
/// Every subset has `K = p + n` items. The test subset is disjoint from the
/// final step's subset; it may overlap subsets of earlier steps.
pub fn make_meta_episode<R: Rng + ?Sized>(
    group: &QueryGroup,
    profile: SparsityProfile,
    strategy: SamplingStrategy,
    inner_steps: usize,
    rng: &mut R,
) -> Result<Episode> {
    if inner_steps == 0 {
        return Err(Error::InvalidConfig("inner_steps must be >= 1".into()));
    }
    let (need_p, need_n) = strategy.episode_requirements(profile)?;
    let pos_pool = group.positive_indices();
    let neg_pool = group.negative_indices();
    if pos_pool.len() < need_p || neg_pool.len() < need_n {
        return Err(insufficient(group, need_p, need_n, pos_pool.len(), neg_pool.len()));
    }

    let (sp, sn) = strategy.step_counts(profile)?;
    let mut train_steps = Vec::with_capacity(inner_steps);
    if strategy.resamples_each_step() {
        for _ in 0..inner_steps {
            train_steps.push(sample_from_pools(group, &pos_pool, &neg_pool, sp, sn, rng)?);
        }
    } else {
        let subset = sample_from_pools(group, &pos_pool, &neg_pool, sp, sn, rng)?;
        train_steps.resize(inner_steps, subset);
    }

    let last = train_steps.last().expect("inner_steps >= 1");
    let keep = |pool: &[usize]| pool.iter().copied().filter(|i| last.binary_search(i).is_err()).collect::<Vec<_>>();
    let test_items = sample_from_pools(
        group,
        &keep(&pos_pool),
        &keep(&neg_pool),
        profile.positives,
        profile.negatives,
        rng,
    )?;

    Ok(Episode {
        query_id: group.query_id.clone(),
        train_steps,
        test_items,
    })
}

/// Samples a `pXnY` tuning subset; every other document goes to evaluation.
pub fn make_finetune_split<R: Rng + ?Sized>(
    group: &QueryGroup,
    profile: SparsityProfile,
    rng: &mut R,
) -> Result<FinetuneSplit> {
    let tuning = sample_pn(group, profile, rng)?;
    let eval = (0..group.len()).filter(|i| tuning.binary_search(i).is_err()).collect();
    Ok(FinetuneSplit {
        query_id: group.query_id.clone(),
        tuning,
        eval,
    })
}
