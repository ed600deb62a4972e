//! Experiment configuration (TOML). Unknown keys are rejected at every level.
//!
//! ```toml
//! seeds = [1, 2, 3]
//! arms = ["LTR", "MLTR_finetune"]
//!
//! [data]
//! path = "data/MQ2008"        # file or directory; or a [data.synthetic] table
//! expected_dims = 46
//! normalize = true
//! split = [0.8, 0.1, 0.1]
//!
//! [model]
//! hidden = [64, 32]
//!
//! [training]
//! loss = "ranknet"
//! sigma = 1.0
//! profile = "p1n9"
//! strategy = "fixed"
//! inner_steps = 3
//! batch_size = 32
//! epochs = 100
//! alpha = 0.01
//! beta = 0.001
//! gradient_mode = "first_order"
//! baseline_learning_rate = 0.001
//!
//! [validation]
//! profile = "p1n9"
//! finetune_epochs = 1
//! k = 10
//!
//! [finetune]
//! profile = "p1n9"
//! epochs = 1
//! learning_rate = 0.01
//! mode = "pooled"
//!
//! [smote]
//! k_neighbors = 5
//! ratio = 1.0
//!
//! [sweep]
//! train_profiles = ["p1n9", "p1n39"]
//! tuning_profiles = ["p1n9", "p1n39"]
//! reference_arm = "LTR"
//!
//! [output]
//! dir = "results"
//! timing = false
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mltr_core::dataset::SplitRatios;
use mltr_core::meta::{FineTuneConfig, FineTuneMode};
use mltr_core::synthetic::SyntheticSpec;
use mltr_core::{
    BaselineConfig, EpisodeConfig, GradientMode, LossKind, MetaConfig, RankerSpec, SamplingStrategy,
    SparsityProfile, ValidationConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Values stored in TOML as strings and parsed with `FromStr`.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, T: Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D, T>(d: D) -> Result<T, D::Error>
    where
        D: Deserializer<'de>,
        T: FromStr,
        T::Err: Display,
    {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }

    pub mod list {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer, T: Display>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
        where
            D: Deserializer<'de>,
            T: FromStr,
            T::Err: Display,
        {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| s.parse().map_err(D::Error::custom))
                .collect()
        }
    }
}

/// Model arms of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "LTR")]
    Ltr,
    #[serde(rename = "LTR+SMOTE")]
    LtrSmote,
    #[serde(rename = "MLTR_no_finetune")]
    MltrNoFinetune,
    #[serde(rename = "MLTR_finetune")]
    MltrFinetune,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Ltr, Arm::LtrSmote, Arm::MltrNoFinetune, Arm::MltrFinetune];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Ltr => "LTR",
            Arm::LtrSmote => "LTR+SMOTE",
            Arm::MltrNoFinetune => "MLTR_no_finetune",
            Arm::MltrFinetune => "MLTR_finetune",
        }
    }

    pub fn is_meta(self) -> bool {
        matches!(self, Arm::MltrNoFinetune | Arm::MltrFinetune)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown arm {s:?}; expected one of LTR, LTR+SMOTE, MLTR_no_finetune, MLTR_finetune"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    #[default]
    Letor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    #[serde(default = "d::synth_queries")]
    pub queries: usize,
    #[serde(default = "d::synth_min_docs")]
    pub min_docs: usize,
    #[serde(default = "d::synth_max_docs")]
    pub max_docs: usize,
    #[serde(default = "d::synth_dims")]
    pub feature_dims: usize,
    #[serde(default = "d::synth_rate")]
    pub positive_rate: f64,
    #[serde(default = "d::synth_noise")]
    pub noise: f64,
    #[serde(default = "d::synth_shift")]
    pub query_shift: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl SyntheticSection {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            queries: self.queries,
            min_docs: self.min_docs,
            max_docs: self.max_docs,
            feature_dims: self.feature_dims,
            positive_rate: self.positive_rate,
            noise: self.noise,
            query_shift: self.query_shift,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub format: DataFormat,
    pub expected_dims: Option<usize>,
    #[serde(default = "d::yes")]
    pub normalize: bool,
    /// Train, validation and test fractions of the queries.
    #[serde(default = "d::split")]
    pub split: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "d::hidden")]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientModeName {
    #[default]
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineTuneModeName {
    #[default]
    Pooled,
    PerQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "d::loss")]
    pub loss: String,
    pub sigma: Option<f64>,
    #[serde(default = "d::profile", with = "text")]
    pub profile: SparsityProfile,
    #[serde(default = "d::strategy", with = "text")]
    pub strategy: SamplingStrategy,
    #[serde(default = "d::inner_steps")]
    pub inner_steps: usize,
    #[serde(default = "d::batch_size")]
    pub batch_size: usize,
    #[serde(default = "d::epochs")]
    pub epochs: usize,
    #[serde(default = "d::alpha")]
    pub alpha: f64,
    #[serde(default = "d::beta")]
    pub beta: f64,
    #[serde(default)]
    pub gradient_mode: GradientModeName,
    #[serde(default = "d::baseline_lr")]
    pub baseline_learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    #[serde(default = "d::profile", with = "text")]
    pub profile: SparsityProfile,
    #[serde(default = "d::one")]
    pub finetune_epochs: usize,
    /// Defaults to the fine-tuning learning rate.
    pub learning_rate: Option<f64>,
    #[serde(default = "d::ten")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    #[serde(default = "d::profile", with = "text")]
    pub profile: SparsityProfile,
    #[serde(default = "d::one")]
    pub epochs: usize,
    #[serde(default = "d::finetune_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub mode: FineTuneModeName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSection {
    #[serde(default = "d::k_neighbors")]
    pub k_neighbors: usize,
    /// Synthetic positives per existing positive.
    #[serde(default = "d::ratio")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(with = "text::list")]
    pub train_profiles: Vec<SparsityProfile>,
    #[serde(with = "text::list")]
    pub tuning_profiles: Vec<SparsityProfile>,
    #[serde(default = "d::reference_arm")]
    pub reference_arm: Arm,
    /// Defaults to the sparsest train profile.
    #[serde(default, with = "opt_profile")]
    pub reference_train_profile: Option<SparsityProfile>,
}

mod opt_profile {
    use mltr_core::SparsityProfile;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<SparsityProfile>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(p) => s.collect_str(p),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SparsityProfile>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(D::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d::out_dir")]
    pub dir: PathBuf,
    /// Record wall-clock seconds; when off every row reports 0 so reports are
    /// byte-identical across runs.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "d::yes")]
    pub checkpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d::arms")]
    pub arms: Vec<Arm>,
    pub data: DataSection,
    #[serde(default = "d::table")]
    pub model: ModelSection,
    #[serde(default = "d::table")]
    pub training: TrainingSection,
    #[serde(default = "d::table")]
    pub validation: ValidationSection,
    #[serde(default = "d::table")]
    pub finetune: FinetuneSection,
    #[serde(default = "d::table")]
    pub smote: SmoteSection,
    pub sweep: Option<SweepSection>,
    #[serde(default = "d::table")]
    pub output: OutputSection,
}

/// Serde defaults.
mod d {
    use super::*;

    pub fn table<T: serde::de::DeserializeOwned>() -> T {
        toml::from_str("").expect("section defaults")
    }
    pub fn yes() -> bool {
        true
    }
    pub fn one() -> usize {
        1
    }
    pub fn ten() -> usize {
        10
    }
    pub fn split() -> [f64; 3] {
        [0.8, 0.1, 0.1]
    }
    pub fn hidden() -> Vec<usize> {
        vec![64, 32]
    }
    pub fn loss() -> String {
        "ranknet".into()
    }
    pub fn profile() -> SparsityProfile {
        SparsityProfile::new(1, 9).expect("p1n9")
    }
    pub fn strategy() -> SamplingStrategy {
        SamplingStrategy::Fixed
    }
    pub fn inner_steps() -> usize {
        3
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn epochs() -> usize {
        100
    }
    pub fn alpha() -> f64 {
        0.01
    }
    pub fn beta() -> f64 {
        0.001
    }
    pub fn baseline_lr() -> f64 {
        0.001
    }
    pub fn finetune_lr() -> f64 {
        0.01
    }
    pub fn k_neighbors() -> usize {
        5
    }
    pub fn ratio() -> f64 {
        1.0
    }
    pub fn reference_arm() -> Arm {
        Arm::Ltr
    }
    pub fn out_dir() -> PathBuf {
        "results".into()
    }
    pub fn seeds() -> Vec<u64> {
        vec![0]
    }
    pub fn arms() -> Vec<Arm> {
        vec![Arm::Ltr, Arm::MltrFinetune]
    }
    pub fn synth_queries() -> usize {
        60
    }
    pub fn synth_min_docs() -> usize {
        30
    }
    pub fn synth_max_docs() -> usize {
        60
    }
    pub fn synth_dims() -> usize {
        8
    }
    pub fn synth_rate() -> f64 {
        0.2
    }
    pub fn synth_noise() -> f64 {
        0.1
    }
    pub fn synth_shift() -> f64 {
        0.3
    }
}

fn invalid(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

fn from_core(e: mltr_core::Error) -> AppError {
    invalid(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `data.path` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            AppError::Config(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(p), Some(dir)) = (cfg.data.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        if self.arms.is_empty() {
            return Err(invalid("arms must not be empty"));
        }
        for (i, a) in self.arms.iter().enumerate() {
            if self.arms[..i].contains(a) {
                return Err(invalid(format!("arm {a} listed twice")));
            }
        }
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(invalid("data: give either path or synthetic, not both")),
            (None, None) => return Err(invalid("data: one of path or synthetic is required")),
            _ => {}
        }
        self.split_ratios()?;
        self.ranker_spec(1)?;
        self.meta_config(0)?.validate().map_err(from_core)?;
        let b = self.baseline_config(0)?;
        if !(b.learning_rate.is_finite() && b.learning_rate >= 0.0) {
            return Err(invalid("training.baseline_learning_rate must be finite and >= 0"));
        }
        let ft = &self.finetune;
        if !(ft.learning_rate.is_finite() && ft.learning_rate >= 0.0) {
            return Err(invalid("finetune.learning_rate must be finite and >= 0"));
        }
        if self.validation.k == 0 {
            return Err(invalid("validation.k must be >= 1"));
        }
        if self.smote.k_neighbors == 0 || !(self.smote.ratio.is_finite() && self.smote.ratio >= 0.0) {
            return Err(invalid("smote needs k_neighbors >= 1 and a finite ratio >= 0"));
        }
        if let Some(s) = &self.sweep {
            if s.train_profiles.is_empty() || s.tuning_profiles.is_empty() {
                return Err(invalid("sweep profile lists must not be empty"));
            }
            if let Some(r) = s.reference_train_profile {
                if !s.train_profiles.contains(&r) {
                    return Err(invalid(format!("sweep.reference_train_profile {r} is not in train_profiles")));
                }
            }
        }
        Ok(())
    }

    pub fn split_ratios(&self) -> Result<SplitRatios> {
        let [a, b, c] = self.data.split;
        SplitRatios::new(a, b, c).map_err(from_core)
    }

    pub fn loss(&self) -> Result<LossKind> {
        LossKind::from_name(&self.training.loss, self.training.sigma).map_err(from_core)
    }

    pub fn ranker_spec(&self, input_dims: usize) -> Result<RankerSpec> {
        RankerSpec::mlp(input_dims, &self.model.hidden).map_err(from_core)
    }

    pub fn finetune_config(&self, epochs: usize) -> FineTuneConfig {
        FineTuneConfig {
            epochs,
            learning_rate: self.finetune.learning_rate,
            mode: match self.finetune.mode {
                FineTuneModeName::Pooled => FineTuneMode::Pooled,
                FineTuneModeName::PerQuery => FineTuneMode::PerQuery,
            },
        }
    }

    pub fn validation_config(&self) -> ValidationConfig {
        let mut finetune = self.finetune_config(self.validation.finetune_epochs);
        if let Some(lr) = self.validation.learning_rate {
            finetune.learning_rate = lr;
        }
        ValidationConfig {
            profile: self.validation.profile,
            finetune,
            k: self.validation.k,
        }
    }

    /// Episode settings for a given train profile and episode seed.
    pub fn episode_config(&self, profile: SparsityProfile, seed: u64) -> EpisodeConfig {
        let t = &self.training;
        EpisodeConfig {
            profile,
            strategy: t.strategy,
            inner_steps: t.inner_steps,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed,
        }
    }

    pub fn meta_config(&self, seed: u64) -> Result<MetaConfig> {
        let t = &self.training;
        Ok(MetaConfig {
            alpha: t.alpha,
            beta: t.beta,
            loss: self.loss()?,
            gradient_mode: match t.gradient_mode {
                GradientModeName::FirstOrder => GradientMode::FirstOrder,
                GradientModeName::SecondOrder => GradientMode::FullSecondOrder,
            },
            episodes: self.episode_config(t.profile, seed),
            validation: self.validation_config(),
        })
    }

    pub fn baseline_config(&self, seed: u64) -> Result<BaselineConfig> {
        Ok(BaselineConfig {
            learning_rate: self.training.baseline_learning_rate,
            loss: self.loss()?,
            episodes: self.episode_config(self.training.profile, seed),
            validation: self.validation_config(),
        })
    }

    /// `(train profiles, tuning profiles)` of the grid; a single cell when
    /// there is no `[sweep]` table.
    pub fn grid(&self) -> (Vec<SparsityProfile>, Vec<SparsityProfile>) {
        match &self.sweep {
            Some(s) => (s.train_profiles.clone(), s.tuning_profiles.clone()),
            None => (vec![self.training.profile], vec![self.finetune.profile]),
        }
    }
}

/// The sparsest profile: most negatives per positive, ties to more negatives.
pub fn sparsest(profiles: &[SparsityProfile]) -> Option<SparsityProfile> {
    profiles
        .iter()
        .copied()
        .max_by(|a, b| a.sparsity().total_cmp(&b.sparsity()).then(a.negatives.cmp(&b.negatives)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[data]\npath = \"x.txt\"\n";

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.training.alpha, 0.01);
        assert_eq!(c.training.beta, 0.001);
        assert_eq!(c.training.inner_steps, 3);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!(c.training.epochs, 100);
        assert_eq!(c.model.hidden, vec![64, 32]);
        assert_eq!(c.finetune.profile.to_string(), "p1n9");
        assert_eq!(c.validation.finetune_epochs, 1);
        assert_eq!(c.loss().unwrap(), LossKind::RankNet { sigma: 1.0 });
        assert!(c.data.normalize);
        assert!(!c.output.timing);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for extra in ["typo = 1\n", "[training]\napha = 0.1\n", "[data.synthetic]\nquerys = 3\n"] {
            let text = if extra.starts_with("[data.") {
                format!("[data]\n{extra}")
            } else {
                format!("{extra}{MINIMAL}")
            };
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(AppError::Config(_))), "{extra}");
        }
    }

    #[test]
    fn rejects_invalid_values() {
        for bad in [
            "seeds = []\n",
            "arms = []\n",
            "arms = [\"MLTR\"]\n",
            "arms = [\"LTR\", \"LTR\"]\n",
            "[training]\nprofile = \"p0n9\"\n",
            "[training]\nloss = \"hinge\"\n",
            "[training]\nalpha = -1.0\n",
            "[model]\nhidden = [0]\n",
            "[data.x]\n",
        ] {
            let text = if bad.starts_with('[') {
                format!("{MINIMAL}{bad}")
            } else {
                format!("{bad}{MINIMAL}")
            };
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{bad}");
        }
        assert!(ExperimentConfig::from_toml("[data]\n").is_err());
        assert!(ExperimentConfig::from_toml("[data]\npath = \"a\"\n[data.synthetic]\n").is_err());
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}[sweep]\ntrain_profiles = [\"p1n9\"]\ntuning_profiles = [\"p1n9\"]\nreference_train_profile = \"p1n4\"\n")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = format!(
            "seeds = [3, 4]\narms = [\"LTR+SMOTE\", \"MLTR_no_finetune\"]\n{MINIMAL}[training]\nstrategy = \"multiple_positive:2\"\nprofile = \"p2n18\"\ngradient_mode = \"second_order\"\n[sweep]\ntrain_profiles = [\"p1n9\", \"p1n39\"]\ntuning_profiles = [\"p1n9\"]\n"
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.training.strategy, SamplingStrategy::MultiplePositive(2));
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn sparsest_profile() {
        let ps: Vec<SparsityProfile> = ["p1n9", "p1n39", "p2n18"].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(sparsest(&ps).unwrap().to_string(), "p1n39");
    }

    #[test]
    fn arm_names() {
        for a in Arm::ALL {
            assert_eq!(a.name().parse::<Arm>().unwrap(), a);
        }
        assert!("ltr+smote".parse::<Arm>().is_ok());
    }
}
