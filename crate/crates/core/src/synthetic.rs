//! Synthetic LETOR-like corpora with a known ideal ranking.
//!
//! Each document's latent relevance is `w_q . x + noise`, where the query's
//! weight vector `w_q` is a shared direction `w` plus a query-specific
//! perturbation. Within each query the top `positive_rate` fraction by latent
//! relevance is labeled positive (the top third of those with grade 2).

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{Dataset, Document, QueryGroup};
use crate::error::Result;
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub queries: usize,
    pub min_docs: usize,
    pub max_docs: usize,
    pub feature_dims: usize,
    pub positive_rate: f64,
    /// Standard deviation-like scale of the label noise.
    pub noise: f64,
    /// Scale of the per-query perturbation of the shared weight vector.
    pub query_shift: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            queries: 60,
            min_docs: 30,
            max_docs: 60,
            feature_dims: 8,
            positive_rate: 0.2,
            noise: 0.1,
            query_shift: 0.3,
            seed: 0,
        }
    }
}

fn centered<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * 2.0 - 1.0
}

/// Latent relevance direction shared by all queries.
pub fn shared_direction(spec: &SyntheticSpec) -> Vec<f64> {
    let mut rng = seeding::stream(spec.seed, &[0x5157]);
    (0..spec.feature_dims).map(|_| centered(&mut rng)).collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    let w = shared_direction(spec);
    let mut rng = seeding::stream(spec.seed, &[0x5158]);
    let mut queries = Vec::with_capacity(spec.queries);
    for qi in 0..spec.queries {
        let wq: Vec<f64> = w.iter().map(|v| v + spec.query_shift * centered(&mut rng)).collect();
        let n_docs = rng.random_range(spec.min_docs..=spec.max_docs.max(spec.min_docs));
        let mut docs: Vec<(f64, Vec<f64>)> = (0..n_docs)
            .map(|_| {
                let x: Vec<f64> = (0..spec.feature_dims).map(|_| rng.random::<f64>()).collect();
                let latent = x.iter().zip(&wq).map(|(a, b)| a * b).sum::<f64>() + spec.noise * centered(&mut rng);
                (latent, x)
            })
            .collect();
        let mut order: Vec<usize> = (0..n_docs).collect();
        order.sort_by(|&a, &b| docs[b].0.total_cmp(&docs[a].0));
        let n_pos = libm::ceil(spec.positive_rate * n_docs as f64) as usize;
        let n_top = libm::ceil(n_pos as f64 / 3.0) as usize;
        let mut grades = alloc::vec![0u32; n_docs];
        for (rank, &i) in order.iter().enumerate().take(n_pos) {
            grades[i] = if rank < n_top { 2 } else { 1 };
        }
        let documents = docs
            .drain(..)
            .zip(grades)
            .enumerate()
            .map(|(di, ((_, x), g))| {
                let mut d = Document::new(x, g);
                d.comment = Some(alloc::format!("docid = S{qi:04}-{di:04}"));
                d
            })
            .collect();
        queries.push(QueryGroup::new(alloc::format!("{}", 1000 + qi), documents));
    }
    Dataset::new(String::from("synthetic"), spec.feature_dims, queries)
}
