//! SMOTE: synthetic minority samples by interpolating between a minority point
//! and one of its nearest minority neighbours.

use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{label_is_positive, Dataset, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    /// Index of the base vector `x` in the input slice.
    pub base: usize,
    /// Index of the neighbour `x_nn` in the input slice.
    pub neighbor: usize,
    /// Interpolation weight in `[0, 1]`.
    pub u: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest other vectors of every vector, by Euclidean distance. Ties break
/// towards the lower index.
fn neighbor_lists(vectors: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let k = k.min(vectors.len() - 1);
    (0..vectors.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..vectors.len())
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&vectors[i], &vectors[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// `x + u (x_nn - x)`.
pub fn interpolate(x: &[f64], neighbor: &[f64], u: f64) -> Vec<f64> {
    x.iter().zip(neighbor).map(|(a, b)| a + u * (b - a)).collect()
}

/// Generates exactly `n_synthetic` samples. Each picks a random base vector, one
/// of its `k_neighbors` nearest neighbours at random and `u ~ U[0, 1)`.
pub fn smote_oversample<R: Rng + ?Sized>(
    positives: &[Vec<f64>],
    k_neighbors: usize,
    n_synthetic: usize,
    rng: &mut R,
) -> Result<Vec<SyntheticSample>> {
    if positives.len() < 2 {
        return Err(Error::InsufficientPositives(positives.len()));
    }
    if k_neighbors == 0 {
        return Err(Error::InvalidConfig("k_neighbors must be >= 1".into()));
    }
    let neighbors = neighbor_lists(positives, k_neighbors);
    Ok((0..n_synthetic)
        .map(|_| {
            let base = rng.random_range(0..positives.len());
            let nn = &neighbors[base];
            let neighbor = nn[rng.random_range(0..nn.len())];
            let u: f64 = rng.random();
            SyntheticSample {
                features: interpolate(&positives[base], &positives[neighbor], u),
                base,
                neighbor,
                u,
            }
        })
        .collect())
}

/// Result of augmenting a training split.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub dataset: Dataset,
    pub synthetic: usize,
}

/// Oversamples the positives pooled across all queries of `dataset`. Each
/// synthetic document joins the query of its base vector with the smallest
/// positive grade in the corpus. `ratio` is synthetic positives per existing
/// positive (rounded down).
pub fn augment_dataset<R: Rng + ?Sized>(dataset: &Dataset, k_neighbors: usize, ratio: f64, rng: &mut R) -> Result<Augmented> {
    let mut owners = Vec::new();
    let mut pool = Vec::new();
    let mut min_grade = u32::MAX;
    for (qi, q) in dataset.queries.iter().enumerate() {
        for d in q.documents.iter().filter(|d| label_is_positive(d.relevance)) {
            owners.push(qi);
            pool.push(d.features.clone());
            min_grade = min_grade.min(d.relevance);
        }
    }
    let n_synthetic = libm::floor(pool.len() as f64 * ratio.max(0.0)) as usize;
    let samples = smote_oversample(&pool, k_neighbors, n_synthetic, rng)?;
    let mut out = dataset.clone();
    for s in samples {
        out.queries[owners[s.base]].documents.push(Document::new(s.features, min_grade));
    }
    Ok(Augmented {
        dataset: out,
        synthetic: n_synthetic,
    })
}
