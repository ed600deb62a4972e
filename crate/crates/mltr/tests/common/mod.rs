#![allow(dead_code)]

use mltr::config::ExperimentConfig;

/// A small synthetic experiment: 60 queries of 30-40 documents, 8 features.
pub const SYNTHETIC: &str = r#"
seeds = [11]
arms = ["LTR", "LTR+SMOTE", "MLTR_no_finetune", "MLTR_finetune"]

[data.synthetic]
queries = 60
min_docs = 30
max_docs = 40
feature_dims = 8
seed = 5

[model]
hidden = [8]

[training]
profile = "p1n9"
epochs = 3
batch_size = 8
inner_steps = 2
alpha = 0.05
beta = 0.05
baseline_learning_rate = 0.05

[finetune]
profile = "p1n9"
epochs = 2
learning_rate = 0.02

[smote]
k_neighbors = 3
ratio = 0.5
"#;

pub fn config(extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!("{SYNTHETIC}\n{extra}")).unwrap()
}
