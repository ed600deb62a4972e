//! Ranking loss of a network on one list of documents, differentiated with
//! respect to the network parameters.

use alloc::vec::Vec;

use crate::losses::{loss_with_grad, LossKind};
use crate::ranker::{self, ParameterVector, Shape};
use crate::scalar::{Dual, Real};

/// One list: feature rows and labels in the same order.
#[derive(Debug, Clone, Copy)]
pub struct ListRef<'a> {
    pub rows: &'a [&'a [f64]],
    pub labels: &'a [u32],
}

fn objective<S: Real>(shape: Shape<'_>, params: &[S], list: ListRef<'_>, kind: &LossKind) -> (S, Vec<S>) {
    ranker::loss_and_param_grad(shape, params, list.rows, |scores| loss_with_grad(kind, scores, list.labels))
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(params: &ParameterVector, list: ListRef<'_>, kind: &LossKind) -> (f64, ParameterVector) {
    let (loss, grad) = objective(params.shape(), params.values(), list, kind);
    (loss, params.with_values(grad))
}

/// Loss value only.
pub fn loss_value(params: &ParameterVector, list: ListRef<'_>, kind: &LossKind) -> f64 {
    let scores: Vec<f64> = list
        .rows
        .iter()
        .map(|x| ranker::score_unchecked(params.shape(), params.values(), x))
        .collect();
    loss_with_grad(kind, &scores, list.labels).0
}

/// Loss and parameter gradient with the parameter values given in any scalar
/// type; `params` supplies only the layout.
pub fn loss_and_grad_in<S: Real>(params: &ParameterVector, values: &[S], list: ListRef<'_>, kind: &LossKind) -> (S, Vec<S>) {
    assert_eq!(values.len(), params.len(), "parameter count");
    objective(params.shape(), values, list, kind)
}

/// Gradient `g` and Hessian-vector product `H v` at `params`, exactly, by
/// running the reverse pass on dual numbers seeded with `v`.
pub fn grad_and_hvp(params: &ParameterVector, list: ListRef<'_>, kind: &LossKind, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(v.len(), params.len());
    let duals: Vec<Dual> = params.values().iter().zip(v).map(|(&p, &t)| Dual::new(p, t)).collect();
    let (_, g) = objective(params.shape(), &duals, list, kind);
    g.into_iter().map(|d| (d.re, d.du)).unzip()
}
