//! Meta learning-to-rank core.
//!
//! Everything in this crate is pure computation over in-memory data: the
//! query/document model, sparse-label episode samplers, a feed-forward scoring
//! network with exact reverse-mode gradients, pointwise/pairwise/listwise
//! ranking losses, the episodic meta-trainer (first and second order), NDCG
//! evaluation and paired significance tests.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the companion `mltr` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod losses;
pub mod meta;
pub mod metrics;
pub mod objective;
pub mod ranker;
pub mod sampling;
pub mod scalar;
pub mod seeding;
pub mod smote;
pub mod stats;
pub mod synthetic;

pub use dataset::{Dataset, Document, QueryGroup};
pub use error::{Error, Result};
pub use losses::{LabeledScores, LossKind, LossValue};
pub use meta::{
    BaselineConfig, EpisodeConfig, FineTuneMode, GradientMode, MetaConfig, TrainHistory,
    ValidationConfig,
};
pub use metrics::{ndcg_at_k, rank_by_scores, RankingMetrics};
pub use ranker::{ParameterVector, RankerSpec};
pub use sampling::{SamplingStrategy, SparsityProfile};
pub use stats::{paired_t_test, TTestResult};
