//! Train / fine-tune / evaluate pipelines over arms, seeds and sparsity grids.
//!
//! Randomness per seed `s`:
//!
//! | stream | key |
//! |--------|-----|
//! | query split | `split_by_query(corpus, ratios, s)` |
//! | init, episodes, validation of train profile `pXnY` | `derive_seed(s, [TRAIN, X, Y])` |
//! | SMOTE augmentation | `stream(s, [ARM, 1, SMOTE])` (1 is the fixed id of LTR+SMOTE) |
//! | test tuning/eval split of tuning profile `pXnY` | `derive_seed(s, [FINETUNE, X, Y])` |
//!
//! Keys depend on profile values rather than list positions, so adding arms
//! or profiles never changes the randomness of existing cells. All arms of a
//! cell see the same query split and the same tuning/eval sets; LTR and MLTR
//! trained on the same profile also share initial parameters and episodes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mltr_core::dataset::split_by_query;
use mltr_core::meta::{self, TrainOutcome};
use mltr_core::sampling::FinetuneSplit;
use mltr_core::seeding::{self, tag};
use mltr_core::{metrics, smote, stats, Dataset, ParameterVector, RankingMetrics, SparsityProfile, TrainHistory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, TrainingState};
use crate::config::{sparsest, Arm, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::report::{RelativeCell, ResultRow, SignificanceRow};

/// Cutoffs reported in every row.
pub const REPORT_KS: [usize; 3] = [1, 5, 10];

/// Fixed arm ids used in seed derivation.
const SMOTE_ARM_ID: u64 = 1;

/// Trained model families; both MLTR arms share one meta-trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ltr,
    LtrSmote,
    Mltr,
}

impl ModelKind {
    pub fn of(arm: Arm) -> Self {
        match arm {
            Arm::Ltr => Self::Ltr,
            Arm::LtrSmote => Self::LtrSmote,
            Arm::MltrNoFinetune | Arm::MltrFinetune => Self::Mltr,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ltr => "ltr",
            Self::LtrSmote => "ltr_smote",
            Self::Mltr => "mltr",
        }
    }
}

/// Distinct model kinds needed by `arms`, in first-use order.
pub fn model_kinds(arms: &[Arm]) -> Vec<ModelKind> {
    let mut out = Vec::new();
    for &a in arms {
        let k = ModelKind::of(a);
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Query-level split of the corpus for one seed.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

pub fn split_corpus(corpus: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let (train, validation, test) = split_by_query(corpus, cfg.split_ratios()?, seed).map_err(|e| AppError::Data(e.to_string()))?;
    Ok(SeedData {
        seed,
        train,
        validation,
        test,
    })
}

pub fn training_seed(seed: u64, profile: SparsityProfile) -> u64 {
    seeding::derive_seed(seed, &[tag::TRAIN, profile.positives as u64, profile.negatives as u64])
}

/// Tuning/eval sets of the test queries for a tuning profile.
pub fn test_splits(test: &Dataset, profile: SparsityProfile, seed: u64) -> Vec<Option<FinetuneSplit>> {
    let s = seeding::derive_seed(seed, &[tag::FINETUNE, profile.positives as u64, profile.negatives as u64]);
    meta::finetune_splits(test, profile, s)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub seed: u64,
    pub train_profile: SparsityProfile,
    pub params: ParameterVector,
    /// Absent for models loaded from checkpoints.
    pub history: Option<TrainHistory>,
    pub seconds: f64,
}

fn elapsed(start: Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn core_err(e: mltr_core::Error) -> AppError {
    AppError::Core(e)
}

pub fn train_model(cfg: &ExperimentConfig, data: &SeedData, kind: ModelKind, profile: SparsityProfile) -> Result<TrainedModel> {
    let start = Instant::now();
    let spec = cfg.ranker_spec(data.train.feature_dims)?;
    let seed = training_seed(data.seed, profile);
    let outcome: TrainOutcome = match kind {
        ModelKind::Mltr => {
            let mut mc = cfg.meta_config(seed)?;
            mc.episodes.profile = profile;
            meta::meta_train(&data.train, &data.validation, &spec, &mc).map_err(core_err)?
        }
        ModelKind::Ltr | ModelKind::LtrSmote => {
            let mut bc = cfg.baseline_config(seed)?;
            bc.episodes.profile = profile;
            if kind == ModelKind::LtrSmote {
                let mut rng = seeding::stream(data.seed, &[tag::ARM, SMOTE_ARM_ID, tag::SMOTE]);
                let aug = smote::augment_dataset(&data.train, cfg.smote.k_neighbors, cfg.smote.ratio, &mut rng).map_err(core_err)?;
                log::debug!("seed {}: SMOTE added {} synthetic positives", data.seed, aug.synthetic);
                meta::baseline_train(&aug.dataset, &data.validation, &spec, &bc).map_err(core_err)?
            } else {
                meta::baseline_train(&data.train, &data.validation, &spec, &bc).map_err(core_err)?
            }
        }
    };
    log::info!(
        "trained {} on {profile}, seed {}: best epoch {:?}, validation NDCG@{} {:?}",
        kind.name(),
        data.seed,
        outcome.history.best_epoch,
        cfg.validation.k,
        outcome.history.best_validation_ndcg
    );
    Ok(TrainedModel {
        kind,
        seed: data.seed,
        train_profile: profile,
        params: outcome.params,
        history: Some(outcome.history),
        seconds: elapsed(start, cfg.output.timing),
    })
}

/// Metrics of one arm in one cell, with the per-query NDCG@10 column used for
/// significance tests.
#[derive(Debug, Clone)]
pub struct ArmEvaluation {
    pub row: ResultRow,
    pub metrics: RankingMetrics,
}

impl ArmEvaluation {
    pub fn per_query_ndcg10(&self) -> Vec<(String, f64)> {
        let col = self.metrics.column(10).expect("ndcg@10 is reported");
        self.metrics.per_query.iter().map(|q| q.query_id.clone()).zip(col).collect()
    }
}

/// Fine-tuning epochs applied to `arm` at test time. LTR arms are fine-tuned
/// like MLTR so the comparison is like for like.
pub fn test_epochs(cfg: &ExperimentConfig, arm: Arm) -> usize {
    match arm {
        Arm::MltrNoFinetune => 0,
        _ => cfg.finetune.epochs,
    }
}

pub fn evaluate_arm(
    cfg: &ExperimentConfig,
    data: &SeedData,
    splits: &[Option<FinetuneSplit>],
    model: &TrainedModel,
    arm: Arm,
    tuning: SparsityProfile,
) -> Result<ArmEvaluation> {
    let start = Instant::now();
    let loss = cfg.loss()?;
    let ft = cfg.finetune_config(test_epochs(cfg, arm));
    let m = meta::finetune_and_evaluate(&model.params, &data.test, splits, &ft, &loss, &REPORT_KS).map_err(core_err)?;
    let at = |k| m.mean_at(k).expect("reported cutoff");
    let row = ResultRow {
        arm: arm.name().to_string(),
        loss: loss.name().to_string(),
        train_profile: model.train_profile.to_string(),
        tuning_profile: tuning.to_string(),
        seed: data.seed,
        ndcg1: at(1),
        ndcg5: at(5),
        ndcg10: at(10),
        skipped: m.skipped,
        seconds: if cfg.output.timing { model.seconds + elapsed(start, true) } else { 0.0 },
    };
    Ok(ArmEvaluation { row, metrics: m })
}

/// Everything a sweep produces.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub evaluations: Vec<ArmEvaluation>,
    pub significance: Vec<SignificanceRow>,
    pub relative: Vec<RelativeCell>,
}

/// Trains every model the configured arms need for each seed and train
/// profile. Models are independent and trained in parallel.
pub fn train_all(cfg: &ExperimentConfig, corpus: &Dataset, train_profiles: &[SparsityProfile]) -> Result<Vec<TrainedModel>> {
    let data = seed_data(cfg, corpus)?;
    let jobs: Vec<(usize, SparsityProfile, ModelKind)> = (0..data.len())
        .flat_map(|si| train_profiles.iter().flat_map(move |&p| model_kinds(&cfg.arms).into_iter().map(move |k| (si, p, k))))
        .collect();
    jobs.par_iter().map(|&(si, p, k)| train_model(cfg, &data[si], k, p)).collect()
}

fn seed_data(cfg: &ExperimentConfig, corpus: &Dataset) -> Result<Vec<SeedData>> {
    cfg.seeds.iter().map(|&s| split_corpus(corpus, cfg, s)).collect()
}

/// Fine-tunes and evaluates trained models on every tuning profile, then
/// builds the significance table and the relative-improvement matrix.
pub fn evaluate_all(cfg: &ExperimentConfig, corpus: &Dataset, models: &[TrainedModel], train_profiles: &[SparsityProfile], tuning_profiles: &[SparsityProfile]) -> Result<SweepReport> {
    let data = seed_data(cfg, corpus)?;
    let lookup: BTreeMap<(u64, SparsityProfile, ModelKind), &TrainedModel> =
        models.iter().map(|m| ((m.seed, m.train_profile, m.kind), m)).collect();

    let mut jobs = Vec::new();
    for (si, d) in data.iter().enumerate() {
        for &tp in train_profiles {
            for (ti, &tu) in tuning_profiles.iter().enumerate() {
                for &arm in &cfg.arms {
                    let model = lookup.get(&(d.seed, tp, ModelKind::of(arm))).ok_or_else(|| {
                        AppError::Data(format!("no trained {} model for {tp}, seed {}", ModelKind::of(arm).name(), d.seed))
                    })?;
                    jobs.push((si, ti, *model, arm, tu));
                }
            }
        }
    }
    let splits: Vec<Vec<Vec<Option<FinetuneSplit>>>> = data
        .iter()
        .map(|d| tuning_profiles.iter().map(|&tu| test_splits(&d.test, tu, d.seed)).collect())
        .collect();
    let evaluations: Vec<ArmEvaluation> = jobs
        .par_iter()
        .map(|&(si, ti, model, arm, tu)| evaluate_arm(cfg, &data[si], &splits[si][ti], model, arm, tu))
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = evaluations.iter().map(|e| e.row.clone()).collect();
    let significance = significance_table(cfg, &evaluations);
    let reference_tp = cfg
        .sweep
        .as_ref()
        .and_then(|s| s.reference_train_profile)
        .or_else(|| sparsest(train_profiles))
        .expect("non-empty train profiles");
    let reference_arm = cfg.sweep.as_ref().map_or(Arm::Ltr, |s| s.reference_arm);
    let relative = relative_improvement(&rows, &cfg.arms, train_profiles, tuning_profiles, reference_arm, reference_tp);
    Ok(SweepReport {
        rows,
        evaluations,
        significance,
        relative,
    })
}

/// Full grid from the config (`[sweep]`, or the single training/fine-tune
/// profile pair).
pub fn run_sweep(cfg: &ExperimentConfig, corpus: &Dataset) -> Result<(Vec<TrainedModel>, SweepReport)> {
    let (train_profiles, tuning_profiles) = cfg.grid();
    let models = train_all(cfg, corpus, &train_profiles)?;
    let report = evaluate_all(cfg, corpus, &models, &train_profiles, &tuning_profiles)?;
    Ok((models, report))
}

/// One cell: `training.profile` × `finetune.profile`, ignoring `[sweep]`.
pub fn run_experiment(cfg: &ExperimentConfig, corpus: &Dataset) -> Result<(Vec<TrainedModel>, SweepReport)> {
    let mut single = cfg.clone();
    single.sweep = None;
    run_sweep(&single, corpus)
}

/// Paired t-tests of each MLTR arm against LTR over per-query NDCG@10, pooled
/// across seeds, one row per (arm, train profile, tuning profile).
pub fn significance_table(cfg: &ExperimentConfig, evaluations: &[ArmEvaluation]) -> Vec<SignificanceRow> {
    if !cfg.arms.contains(&Arm::Ltr) {
        return Vec::new();
    }
    type Key = (String, String, String);
    let mut by_cell: BTreeMap<Key, Vec<&ArmEvaluation>> = BTreeMap::new();
    for e in evaluations {
        by_cell
            .entry((e.row.train_profile.clone(), e.row.tuning_profile.clone(), e.row.arm.clone()))
            .or_default()
            .push(e);
    }
    let mut out = Vec::new();
    let mut cells: Vec<(String, String)> = by_cell.keys().map(|(a, b, _)| (a.clone(), b.clone())).collect();
    cells.dedup();
    for (tp, tu) in cells {
        let Some(base) = by_cell.get(&(tp.clone(), tu.clone(), Arm::Ltr.name().to_string())) else {
            continue;
        };
        for arm in cfg.arms.iter().filter(|a| a.is_meta()) {
            let Some(evals) = by_cell.get(&(tp.clone(), tu.clone(), arm.name().to_string())) else {
                continue;
            };
            let (mut a, mut b, mut seeds) = (Vec::new(), Vec::new(), Vec::new());
            for e in evals {
                let Some(base_e) = base.iter().find(|x| x.row.seed == e.row.seed) else {
                    continue;
                };
                let base_q: BTreeMap<String, f64> = base_e.per_query_ndcg10().into_iter().collect();
                for (q, v) in e.per_query_ndcg10() {
                    if let Some(&bv) = base_q.get(&q) {
                        a.push(v);
                        b.push(bv);
                    }
                }
                seeds.push(e.row.seed);
            }
            match stats::paired_t_test(&a, &b) {
                Ok(t) => out.push(SignificanceRow {
                    arm: arm.name().to_string(),
                    baseline: Arm::Ltr.name().to_string(),
                    loss: evals[0].row.loss.clone(),
                    train_profile: tp.clone(),
                    tuning_profile: tu.clone(),
                    seeds,
                    pairs: a.len(),
                    mean_difference: t.mean_difference,
                    t_statistic: (!t.zero_variance).then_some(t.t_statistic),
                    degrees_of_freedom: t.degrees_of_freedom,
                    p_value: t.p_value,
                    significant: t.significant_at_0_01,
                }),
                Err(e) => log::warn!("no t-test for {arm} vs LTR on {tp}/{tu}: {e}"),
            }
        }
    }
    out
}

fn mean_ndcg10(rows: &[ResultRow], arm: &str, tp: &str, tu: &str) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.arm == arm && r.train_profile == tp && r.tuning_profile == tu)
        .map(|r| r.ndcg10)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Seed-averaged NDCG@10 of every (arm, train profile, tuning profile) cell
/// relative to the reference arm trained on `reference_tp`, per tuning
/// profile column.
pub fn relative_improvement(
    rows: &[ResultRow],
    arms: &[Arm],
    train_profiles: &[SparsityProfile],
    tuning_profiles: &[SparsityProfile],
    reference_arm: Arm,
    reference_tp: SparsityProfile,
) -> Vec<RelativeCell> {
    let mut out = Vec::new();
    for tu in tuning_profiles {
        let tu = tu.to_string();
        let Some(reference) = mean_ndcg10(rows, reference_arm.name(), &reference_tp.to_string(), &tu) else {
            log::warn!("reference {reference_arm} on {reference_tp}/{tu} missing; no relative improvements");
            continue;
        };
        for arm in arms {
            for tp in train_profiles {
                let tp = tp.to_string();
                if let Some(v) = mean_ndcg10(rows, arm.name(), &tp, &tu) {
                    out.push(RelativeCell {
                        arm: arm.name().to_string(),
                        train_profile: tp,
                        tuning_profile: tu.clone(),
                        ndcg10: v,
                        reference_ndcg10: reference,
                        relative_improvement: (reference != 0.0).then(|| (v - reference) / reference),
                    });
                }
            }
        }
    }
    out
}

/// Per-epoch training log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLine {
    pub epoch: usize,
    pub query_loss: f64,
    pub meta_loss: Option<f64>,
    pub validation_ndcg: Option<f64>,
    pub used_queries: usize,
    pub skipped_queries: usize,
}

pub fn checkpoint_path(dir: &Path, kind: ModelKind, profile: SparsityProfile, seed: u64) -> PathBuf {
    dir.join(format!("{}_{profile}_seed{seed}.ckpt", kind.name()))
}

/// Writes `<kind>_<profile>_seed<seed>.ckpt`, a `.state.json` sidecar and, for
/// freshly trained models, a `.history.jsonl` per-epoch log.
pub fn save_models(models: &[TrainedModel], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(format!("creating {}", dir.display()), e))?;
    for m in models {
        let path = checkpoint_path(dir, m.kind, m.train_profile, m.seed);
        Checkpoint::new(m.seed, m.params.clone()).save(&path)?;
        let h = m.history.as_ref();
        TrainingState {
            seed: m.seed,
            spec: m.params.spec().tag(),
            next_epoch: h.map_or(0, |h| h.records.len()),
            best_epoch: h.and_then(|h| h.best_epoch),
            best_validation_ndcg: h.and_then(|h| h.best_validation_ndcg),
        }
        .save(&path.with_extension("state.json"))?;
        if let Some(h) = h {
            let lines: Vec<EpochLine> = h
                .records
                .iter()
                .map(|r| EpochLine {
                    epoch: r.epoch,
                    query_loss: r.query_loss,
                    meta_loss: r.meta_loss,
                    validation_ndcg: r.validation_ndcg,
                    used_queries: r.used_queries,
                    skipped_queries: r.skipped_queries,
                })
                .collect();
            let hp = path.with_extension("history.jsonl");
            let f = std::fs::File::create(&hp).map_err(|e| AppError::io(format!("creating {}", hp.display()), e))?;
            crate::report::write_jsonl(&lines, std::io::BufWriter::new(f)).map_err(|e| AppError::io(format!("writing {}", hp.display()), e))?;
        }
    }
    Ok(())
}

/// Loads the checkpoints `save_models` wrote for the configured arms, seeds
/// and train profiles.
pub fn load_models(cfg: &ExperimentConfig, dir: &Path, train_profiles: &[SparsityProfile]) -> Result<Vec<TrainedModel>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        for &p in train_profiles {
            for kind in model_kinds(&cfg.arms) {
                let path = checkpoint_path(dir, kind, p, seed);
                if !path.is_file() {
                    return Err(AppError::Data(format!("missing checkpoint {}; run `train` first", path.display())));
                }
                let c = Checkpoint::load(&path)?;
                out.push(TrainedModel {
                    kind,
                    seed,
                    train_profile: p,
                    params: c.params,
                    history: None,
                    seconds: 0.0,
                });
            }
        }
    }
    Ok(out)
}

/// Evaluates stored parameters directly, with no fine-tuning.
pub fn evaluate_checkpoint(params: &ParameterVector, test: &Dataset, splits: &[Option<FinetuneSplit>]) -> RankingMetrics {
    metrics::evaluate_model(params, test, splits, &REPORT_KS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arm: &str, tp: &str, tu: &str, seed: u64, ndcg10: f64) -> ResultRow {
        ResultRow {
            arm: arm.into(),
            loss: "ranknet".into(),
            train_profile: tp.into(),
            tuning_profile: tu.into(),
            seed,
            ndcg1: 0.0,
            ndcg5: 0.0,
            ndcg10,
            skipped: 0,
            seconds: 0.0,
        }
    }

    #[test]
    fn relative_matrix_by_hand() {
        let p = |s: &str| s.parse::<SparsityProfile>().unwrap();
        let rows = vec![
            row("LTR", "p1n9", "p1n9", 0, 0.6),
            row("LTR", "p1n39", "p1n9", 0, 0.4),
            row("LTR", "p1n39", "p1n9", 1, 0.6),
            row("MLTR_finetune", "p1n9", "p1n9", 0, 0.75),
        ];
        let cells = relative_improvement(&rows, &[Arm::Ltr, Arm::MltrFinetune], &[p("p1n9"), p("p1n39")], &[p("p1n9")], Arm::Ltr, p("p1n39"));
        assert_eq!(cells.len(), 3);
        let get = |arm: &str, tp: &str| cells.iter().find(|c| c.arm == arm && c.train_profile == tp).unwrap();
        assert_eq!(get("LTR", "p1n39").relative_improvement, Some(0.0));
        assert!((get("LTR", "p1n9").relative_improvement.unwrap() - 0.2).abs() < 1e-12);
        assert!((get("MLTR_finetune", "p1n9").relative_improvement.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kinds_are_shared_by_mltr_arms() {
        assert_eq!(model_kinds(&[Arm::MltrFinetune, Arm::Ltr, Arm::MltrNoFinetune]), vec![ModelKind::Mltr, ModelKind::Ltr]);
    }
}
