//! Episodic meta-training of a ranker, the plain learning-to-rank control arm,
//! and test-time fine-tuning.
//!
//! One meta-training step over a batch of queries:
//!
//! 1. every query `i` starts from `theta_i = theta` and takes `T` gradient
//!    steps `theta_i <- theta_i - alpha * grad L_train,i(theta_i)`, one per
//!    sampled training subset;
//! 2. the meta loss is the mean test-subset loss of the adapted parameters,
//!    `L_meta = (1/B) sum_i L_test,i(theta_i)`;
//! 3. `theta <- theta - beta * grad_theta L_meta`.
//!
//! In [`GradientMode::FirstOrder`] the meta-gradient stops at the adapted
//! parameters. [`GradientMode::FullSecondOrder`] differentiates through every
//! inner step: with `v_T = grad L_test(theta_T)`,
//! `v_{t-1} = (I - alpha H_t(theta_{t-1})) v_t`, using exact Hessian-vector
//! products.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, QueryGroup};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::metrics::{self, RankingMetrics};
use crate::objective::{self, ListRef};
use crate::ranker::{self, ParameterVector, RankerSpec};
use crate::sampling::{self, Episode, FinetuneSplit, SamplingStrategy, SparsityProfile};
use crate::seeding::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    FirstOrder,
    FullSecondOrder,
}

/// Whether test-time fine-tuning produces one shared parameter vector (one
/// pass over all tuning sets) or a separate copy per evaluated query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FineTuneMode {
    #[default]
    Pooled,
    PerQuery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub mode: FineTuneMode,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            learning_rate: 0.01,
            mode: FineTuneMode::Pooled,
        }
    }
}

/// Per-epoch model selection on the validation split: sample `profile` tuning
/// sets, fine-tune, and score NDCG@`k` on the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub profile: SparsityProfile,
    pub finetune: FineTuneConfig,
    pub k: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            profile: SparsityProfile {
                positives: 1,
                negatives: 9,
            },
            finetune: FineTuneConfig::default(),
            k: 10,
        }
    }
}

/// Episode stream shared by the meta-trainer and the baseline: identical
/// values produce identical batches and identical sampled subsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub profile: SparsityProfile,
    pub strategy: SamplingStrategy,
    pub inner_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            profile: SparsityProfile {
                positives: 1,
                negatives: 9,
            },
            strategy: SamplingStrategy::Fixed,
            inner_steps: 3,
            batch_size: 32,
            epochs: 100,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("inner_steps and batch_size must be >= 1".into()));
        }
        SparsityProfile::new(self.profile.positives, self.profile.negatives)?;
        self.strategy.step_counts(self.profile)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    /// Inner (query-specific) learning rate.
    pub alpha: f64,
    /// Meta learning rate.
    pub beta: f64,
    pub loss: LossKind,
    pub gradient_mode: GradientMode,
    pub episodes: EpisodeConfig,
    pub validation: ValidationConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.001,
            loss: LossKind::RankNet {
                sigma: LossKind::DEFAULT_SIGMA,
            },
            gradient_mode: GradientMode::FirstOrder,
            episodes: EpisodeConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

impl MetaConfig {
    /// Items per sampled subset, `K = p + n`.
    pub fn items_per_step(&self) -> usize {
        self.episodes.profile.total()
    }

    pub fn validate(&self) -> Result<()> {
        // alpha = 0 / beta = 0 are allowed: they are the identity probes.
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidConfig("alpha and beta must be finite and non-negative".into()));
        }
        self.episodes.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub loss: LossKind,
    pub episodes: EpisodeConfig,
    pub validation: ValidationConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let meta = MetaConfig::default();
        Self {
            learning_rate: 0.001,
            loss: meta.loss,
            episodes: meta.episodes,
            validation: meta.validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean inner-loop (training subset) loss over the epoch's tasks.
    pub query_loss: f64,
    /// Mean batch meta loss; `None` for the baseline trainer.
    pub meta_loss: Option<f64>,
    pub validation_ndcg: Option<f64>,
    pub used_queries: usize,
    pub skipped_queries: usize,
    /// Fingerprint of every episode drawn in the epoch, in consumption order.
    pub episode_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub best_validation_ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ParameterVector,
    pub history: TrainHistory,
}

/// Result of the inner loop for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub params: ParameterVector,
    /// Training-subset loss before each step.
    pub step_losses: Vec<f64>,
    /// Parameters before each step (`trajectory[0] == theta`).
    pub trajectory: Vec<ParameterVector>,
}

fn list<'a>(group: &'a QueryGroup, items: &[usize], rows: &'a mut Vec<&'a [f64]>, labels: &'a mut Vec<u32>) -> ListRef<'a> {
    for &i in items {
        let d = &group.documents[i];
        rows.push(&d.features);
        labels.push(d.relevance);
    }
    ListRef { rows, labels }
}

fn subset_loss_and_grad(params: &ParameterVector, group: &QueryGroup, items: &[usize], loss: &LossKind) -> (f64, ParameterVector) {
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    objective::loss_and_grad(params, list(group, items, &mut rows, &mut labels), loss)
}

fn subset_grad_and_hvp(params: &ParameterVector, group: &QueryGroup, items: &[usize], loss: &LossKind, v: &[f64]) -> Vec<f64> {
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    objective::grad_and_hvp(params, list(group, items, &mut rows, &mut labels), loss, v).1
}

/// Loss of `params` on a subset of one query's documents.
pub fn subset_loss(params: &ParameterVector, group: &QueryGroup, items: &[usize], loss: &LossKind) -> f64 {
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    objective::loss_value(params, list(group, items, &mut rows, &mut labels), loss)
}

fn check_dims(params: &ParameterVector, group: &QueryGroup) -> Result<()> {
    match group.documents.first() {
        Some(d) if d.features.len() != params.input_dims() => Err(Error::DimensionMismatch {
            expected: params.input_dims(),
            actual: d.features.len(),
        }),
        _ => Ok(()),
    }
}

/// Runs the query-specific inner loop: one SGD step with rate `cfg.alpha` per
/// training subset. `theta` is not modified.
pub fn inner_adapt(theta: &ParameterVector, group: &QueryGroup, train_sets: &[Vec<usize>], cfg: &MetaConfig) -> Result<Adaptation> {
    check_dims(theta, group)?;
    let mut params = theta.clone();
    let mut step_losses = Vec::with_capacity(train_sets.len());
    let mut trajectory = Vec::with_capacity(train_sets.len());
    for (step, items) in train_sets.iter().enumerate() {
        let (loss, grad) = subset_loss_and_grad(&params, group, items, &cfg.loss);
        if !loss.is_finite() || grad.values().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                query_id: group.query_id.clone(),
                step: step + 1,
            });
        }
        step_losses.push(loss);
        let next = ranker::apply_sgd_step(&params, &grad, cfg.alpha)?;
        trajectory.push(core::mem::replace(&mut params, next));
    }
    Ok(Adaptation {
        params,
        step_losses,
        trajectory,
    })
}

/// One adapted task of a meta batch.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub group: &'a QueryGroup,
    pub train_sets: &'a [Vec<usize>],
    pub test_items: &'a [usize],
    pub adaptation: &'a Adaptation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaGradient {
    /// `L_meta`: mean test loss of the adapted parameters.
    pub loss: f64,
    pub grad: ParameterVector,
    pub per_query_loss: Vec<f64>,
}

/// Test loss of one task and its contribution `d L_test,i / d theta`.
pub fn task_meta_gradient(theta: &ParameterVector, task: &Task<'_>, cfg: &MetaConfig) -> Result<(f64, Vec<f64>)> {
    let adapted = &task.adaptation.params;
    let (loss, grad) = subset_loss_and_grad(adapted, task.group, task.test_items, &cfg.loss);
    if !loss.is_finite() || grad.values().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            query_id: task.group.query_id.clone(),
            step: task.train_sets.len() + 1,
        });
    }
    let mut v = grad.values().to_vec();
    if cfg.gradient_mode == GradientMode::FullSecondOrder && cfg.alpha != 0.0 {
        debug_assert_eq!(task.adaptation.trajectory.first().map(|p| p.values()), Some(theta.values()));
        for (params, items) in task.adaptation.trajectory.iter().zip(task.train_sets).rev() {
            let hv = subset_grad_and_hvp(params, task.group, items, &cfg.loss, &v);
            for (vi, h) in v.iter_mut().zip(hv) {
                *vi -= cfg.alpha * h;
            }
        }
        if v.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                query_id: task.group.query_id.clone(),
                step: task.train_sets.len() + 1,
            });
        }
    }
    Ok((loss, v))
}

/// Gradient of the batch meta loss with respect to `theta`. Contributions are
/// summed in batch order.
pub fn meta_gradient(theta: &ParameterVector, tasks: &[Task<'_>], cfg: &MetaConfig) -> Result<MetaGradient> {
    if tasks.is_empty() {
        return Err(Error::InvalidBatch("meta batch is empty".into()));
    }
    let mut per_query_loss = Vec::with_capacity(tasks.len());
    let mut sum = vec![0.0; theta.len()];
    for task in tasks {
        let (loss, g) = task_meta_gradient(theta, task, cfg)?;
        per_query_loss.push(loss);
        for (s, gi) in sum.iter_mut().zip(g) {
            *s += gi;
        }
    }
    let b = tasks.len() as f64;
    Ok(MetaGradient {
        loss: per_query_loss.iter().sum::<f64>() / b,
        grad: theta.with_values(sum.into_iter().map(|s| s / b).collect()),
        per_query_loss,
    })
}

/// Eval splits for every query of `dataset`; `None` where the query lacks the
/// items `profile` needs. Each query draws from its own stream keyed by
/// `(seed, FINETUNE, query index)`.
pub fn finetune_splits(dataset: &Dataset, profile: SparsityProfile, seed: u64) -> Vec<Option<FinetuneSplit>> {
    dataset
        .queries
        .iter()
        .enumerate()
        .map(|(qi, g)| {
            let mut rng = seeding::stream(seed, &[tag::FINETUNE, qi as u64]);
            sampling::make_finetune_split(g, profile, &mut rng).ok()
        })
        .collect()
}

fn tuning_sets<'a>(dataset: &'a Dataset, splits: &'a [Option<FinetuneSplit>]) -> impl Iterator<Item = (usize, &'a QueryGroup, &'a [usize])> {
    dataset
        .queries
        .iter()
        .zip(splits)
        .enumerate()
        .filter_map(|(qi, (g, s))| s.as_ref().map(|s| (qi, g, s.tuning.as_slice())))
        .filter(|(_, _, t)| !t.is_empty())
}

fn finetune_step(params: &ParameterVector, group: &QueryGroup, items: &[usize], lr: f64, loss: &LossKind, step: usize) -> Result<ParameterVector> {
    let (value, grad) = subset_loss_and_grad(params, group, items, loss);
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss {
            query_id: group.query_id.clone(),
            step,
        });
    }
    ranker::apply_sgd_step(params, &grad, lr)
}

/// Pooled fine-tuning: for each epoch, one gradient step per query on its
/// tuning items, in dataset order, carried over a single parameter vector.
/// `epochs = 0` returns `theta` unchanged.
pub fn fine_tune(theta: &ParameterVector, dataset: &Dataset, splits: &[Option<FinetuneSplit>], epochs: usize, lr: f64, loss: &LossKind) -> Result<ParameterVector> {
    let mut params = theta.clone();
    for epoch in 0..epochs {
        for (_, group, items) in tuning_sets(dataset, splits) {
            params = finetune_step(&params, group, items, lr, loss, epoch + 1)?;
        }
    }
    Ok(params)
}

/// Per-query fine-tuning: query `i` gets its own copy of `theta` adapted with
/// `epochs` steps on its tuning items. Queries without a split keep `theta`.
pub fn fine_tune_per_query(theta: &ParameterVector, dataset: &Dataset, splits: &[Option<FinetuneSplit>], epochs: usize, lr: f64, loss: &LossKind) -> Result<Vec<ParameterVector>> {
    let mut out = vec![theta.clone(); dataset.queries.len()];
    for (qi, group, items) in tuning_sets(dataset, splits) {
        for epoch in 0..epochs {
            out[qi] = finetune_step(&out[qi], group, items, lr, loss, epoch + 1)?;
        }
    }
    Ok(out)
}

/// Fine-tunes according to `cfg` and evaluates NDCG at `ks` on the eval parts.
pub fn finetune_and_evaluate(theta: &ParameterVector, dataset: &Dataset, splits: &[Option<FinetuneSplit>], cfg: &FineTuneConfig, loss: &LossKind, ks: &[usize]) -> Result<RankingMetrics> {
    match cfg.mode {
        FineTuneMode::Pooled => {
            let tuned = fine_tune(theta, dataset, splits, cfg.epochs, cfg.learning_rate, loss)?;
            Ok(metrics::evaluate_model(&tuned, dataset, splits, ks))
        }
        FineTuneMode::PerQuery => {
            let tuned = fine_tune_per_query(theta, dataset, splits, cfg.epochs, cfg.learning_rate, loss)?;
            Ok(metrics::evaluate_with(dataset, splits, ks, |qi| &tuned[qi]))
        }
    }
}

/// Feasible training queries and the number skipped.
fn usable_queries(train: &Dataset, ep: &EpisodeConfig) -> Result<(Vec<usize>, usize)> {
    let mut usable = Vec::new();
    for (qi, g) in train.queries.iter().enumerate() {
        if sampling::episode_feasible(g, ep.profile, ep.strategy)? {
            usable.push(qi);
        }
    }
    let skipped = train.queries.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::NoUsableQueries { skipped });
    }
    Ok((usable, skipped))
}

/// Shuffled batches for one epoch, each sorted by query index.
fn epoch_batches(usable: &[usize], epoch: usize, ep: &EpisodeConfig) -> Vec<Vec<usize>> {
    let mut order = usable.to_vec();
    order.shuffle(&mut seeding::stream(ep.seed, &[tag::SHUFFLE, epoch as u64]));
    order
        .chunks(ep.batch_size)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect()
}

/// The episode of query `qi` in `epoch`, independent of batch composition.
pub fn episode_for(train: &Dataset, qi: usize, epoch: usize, ep: &EpisodeConfig) -> Result<Episode> {
    let mut rng = seeding::stream(ep.seed, &[tag::EPISODE, epoch as u64, qi as u64]);
    sampling::make_meta_episode(&train.queries[qi], ep.profile, ep.strategy, ep.inner_steps, &mut rng)
}

fn digest_episode(h: u64, qi: usize, episode: &Episode) -> u64 {
    let mut h = seeding::splitmix64(h ^ qi as u64);
    for items in episode.train_steps.iter().chain(core::iter::once(&episode.test_items)) {
        h = seeding::splitmix64(h ^ items.len() as u64);
        for &i in items {
            h = seeding::splitmix64(h ^ i as u64);
        }
    }
    h
}

/// Tuning/eval splits of the validation queries used for model selection.
pub fn validation_splits(val: &Dataset, cfg: &ValidationConfig, seed: u64) -> Vec<Option<FinetuneSplit>> {
    finetune_splits(val, cfg.profile, seeding::derive_seed(seed, &[tag::VALIDATION]))
}

struct Selector {
    splits: Vec<Option<FinetuneSplit>>,
    cfg: ValidationConfig,
    best: Option<(f64, usize, ParameterVector)>,
}

impl Selector {
    fn new(val: &Dataset, cfg: ValidationConfig, seed: u64) -> Self {
        Self {
            splits: validation_splits(val, &cfg, seed),
            cfg,
            best: None,
        }
    }

    fn observe(&mut self, val: &Dataset, theta: &ParameterVector, epoch: usize, loss: &LossKind) -> Result<Option<f64>> {
        let m = finetune_and_evaluate(theta, val, &self.splits, &self.cfg.finetune, loss, &[self.cfg.k])?;
        if m.per_query.is_empty() {
            return Ok(None);
        }
        let ndcg = m.mean[0];
        if self.best.as_ref().is_none_or(|(b, _, _)| ndcg > *b) {
            self.best = Some((ndcg, epoch, theta.clone()));
        }
        Ok(Some(ndcg))
    }

    fn finish(self, last: ParameterVector, mut history: TrainHistory) -> TrainOutcome {
        match self.best {
            Some((ndcg, epoch, params)) => {
                history.best_epoch = Some(epoch);
                history.best_validation_ndcg = Some(ndcg);
                TrainOutcome { params, history }
            }
            None => {
                history.best_epoch = history.records.last().map(|r| r.epoch);
                TrainOutcome { params: last, history }
            }
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Meta-trains a ranker of shape `spec`, returning the parameters with the
/// best validation NDCG and the per-epoch history.
pub fn meta_train(train: &Dataset, val: &Dataset, spec: &RankerSpec, cfg: &MetaConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    meta_train_from(init_params_for(spec, train, cfg.episodes.seed)?, train, val, cfg)
}

fn init_params_for(spec: &RankerSpec, train: &Dataset, seed: u64) -> Result<ParameterVector> {
    if spec.input_dims() != train.feature_dims {
        return Err(Error::DimensionMismatch {
            expected: train.feature_dims,
            actual: spec.input_dims(),
        });
    }
    Ok(ranker::init_params(spec, seed))
}

/// [`meta_train`] starting from given parameters.
pub fn meta_train_from(init: ParameterVector, train: &Dataset, val: &Dataset, cfg: &MetaConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ep = &cfg.episodes;
    let (usable, infeasible) = usable_queries(train, ep)?;
    let mut theta = init;
    let mut selector = Selector::new(val, cfg.validation, ep.seed);
    let mut history = TrainHistory::default();

    for epoch in 0..ep.epochs {
        let mut query_losses = Vec::new();
        let mut meta_losses = Vec::new();
        let mut failed = 0;
        let mut digest = 0u64;
        for batch in epoch_batches(&usable, epoch, ep) {
            let mut episodes = Vec::with_capacity(batch.len());
            let mut adaptations = Vec::with_capacity(batch.len());
            for &qi in &batch {
                let episode = episode_for(train, qi, epoch, ep)?;
                digest = digest_episode(digest, qi, &episode);
                match inner_adapt(&theta, &train.queries[qi], &episode.train_steps, cfg) {
                    Ok(a) => {
                        episodes.push((qi, episode));
                        adaptations.push(a);
                    }
                    Err(Error::NonFiniteLoss { .. }) => failed += 1,
                    Err(e) => return Err(e),
                }
            }
            let mut sum = vec![0.0; theta.len()];
            let mut batch_losses = Vec::with_capacity(episodes.len());
            for ((qi, episode), adaptation) in episodes.iter().zip(&adaptations) {
                let task = Task {
                    group: &train.queries[*qi],
                    train_sets: &episode.train_steps,
                    test_items: &episode.test_items,
                    adaptation,
                };
                match task_meta_gradient(&theta, &task, cfg) {
                    Ok((loss, g)) => {
                        for (s, gi) in sum.iter_mut().zip(g) {
                            *s += gi;
                        }
                        batch_losses.push(loss);
                        query_losses.push(mean(&adaptation.step_losses));
                    }
                    Err(Error::NonFiniteLoss { .. }) => failed += 1,
                    Err(e) => return Err(e),
                }
            }
            if batch_losses.is_empty() {
                continue;
            }
            let b = batch_losses.len() as f64;
            let grad = theta.with_values(sum.into_iter().map(|s| s / b).collect());
            theta = ranker::apply_sgd_step(&theta, &grad, cfg.beta)?;
            meta_losses.push(mean(&batch_losses));
        }
        let validation_ndcg = selector.observe(val, &theta, epoch, &cfg.loss)?;
        history.records.push(EpochRecord {
            epoch,
            query_loss: mean(&query_losses),
            meta_loss: Some(mean(&meta_losses)),
            validation_ndcg,
            used_queries: usable.len() - failed,
            skipped_queries: infeasible + failed,
            episode_digest: digest,
        });
    }
    Ok(selector.finish(theta, history))
}

/// Plain mini-batch training on the same episodes the meta-trainer would
/// draw: every distinct sampled subset of a query contributes its loss
/// gradient at the current parameters, averaged per query and then per batch.
pub fn baseline_train(train: &Dataset, val: &Dataset, spec: &RankerSpec, cfg: &BaselineConfig) -> Result<TrainOutcome> {
    baseline_train_from(init_params_for(spec, train, cfg.episodes.seed)?, train, val, cfg)
}

pub fn baseline_train_from(init: ParameterVector, train: &Dataset, val: &Dataset, cfg: &BaselineConfig) -> Result<TrainOutcome> {
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::InvalidConfig("learning_rate must be finite and non-negative".into()));
    }
    let ep = &cfg.episodes;
    ep.validate()?;
    let (usable, infeasible) = usable_queries(train, ep)?;
    let mut theta = init;
    let mut selector = Selector::new(val, cfg.validation, ep.seed);
    let mut history = TrainHistory::default();

    for epoch in 0..ep.epochs {
        let mut query_losses = Vec::new();
        let mut failed = 0;
        let mut digest = 0u64;
        for batch in epoch_batches(&usable, epoch, ep) {
            let mut sum = vec![0.0; theta.len()];
            let mut used = 0usize;
            for &qi in &batch {
                let episode = episode_for(train, qi, epoch, ep)?;
                digest = digest_episode(digest, qi, &episode);
                let group = &train.queries[qi];
                let mut subsets: Vec<&[usize]> = Vec::with_capacity(episode.train_steps.len() + 1);
                for s in &episode.train_steps {
                    if subsets.last() != Some(&s.as_slice()) {
                        subsets.push(s);
                    }
                }
                subsets.push(&episode.test_items);

                let mut q_sum = vec![0.0; theta.len()];
                let mut q_losses = Vec::with_capacity(subsets.len());
                for items in &subsets {
                    let (loss, g) = subset_loss_and_grad(&theta, group, items, &cfg.loss);
                    q_losses.push(loss);
                    for (s, gi) in q_sum.iter_mut().zip(g.values()) {
                        *s += gi;
                    }
                }
                if q_losses.iter().any(|l| !l.is_finite()) || q_sum.iter().any(|g| !g.is_finite()) {
                    failed += 1;
                    continue;
                }
                let n = subsets.len() as f64;
                for (s, q) in sum.iter_mut().zip(q_sum) {
                    *s += q / n;
                }
                query_losses.push(mean(&q_losses));
                used += 1;
            }
            if used == 0 {
                continue;
            }
            let grad = theta.with_values(sum.into_iter().map(|s| s / used as f64).collect());
            theta = ranker::apply_sgd_step(&theta, &grad, cfg.learning_rate)?;
        }
        let validation_ndcg = selector.observe(val, &theta, epoch, &cfg.loss)?;
        history.records.push(EpochRecord {
            epoch,
            query_loss: mean(&query_losses),
            meta_loss: None,
            validation_ndcg,
            used_queries: usable.len() - failed,
            skipped_queries: infeasible + failed,
            episode_digest: digest,
        });
    }
    Ok(selector.finish(theta, history))
}
