//! Feed-forward scoring network over a flat parameter vector.
//!
//! Layer `l` maps `fan_in -> fan_out`; its parameters are stored as a
//! row-major `fan_out x fan_in` weight block followed by `fan_out` biases
//! (omitted for bias-free networks). Hidden layers use a rectifier
//! (derivative 0 at 0), the output layer is linear and produces a single
//! score.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankerSpec {
    /// Input width, hidden widths..., 1.
    pub layer_dims: Vec<usize>,
    pub bias: bool,
}

impl RankerSpec {
    pub fn new(layer_dims: Vec<usize>) -> Result<Self> {
        validate_dims(&layer_dims)?;
        Ok(Self { layer_dims, bias: true })
    }

    /// `input -> hidden... -> 1`.
    pub fn mlp(input: usize, hidden: &[usize]) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(1);
        Self::new(dims)
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn input_dims(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_params(&self) -> usize {
        self.shape().num_params()
    }

    /// Short tag such as `mlp-46-64-32-1` (`mlp0-...` without biases), stored
    /// in checkpoints.
    pub fn tag(&self) -> String {
        let mut s = String::from(if self.bias { "mlp" } else { "mlp0" });
        for d in &self.layer_dims {
            s.push('-');
            s.push_str(&alloc::format!("{d}"));
        }
        s
    }

    /// Inverse of [`RankerSpec::tag`].
    pub fn from_tag(tag: &str) -> Result<Self> {
        let bad = || Error::Parse(alloc::format!("invalid ranker tag {tag:?}"));
        let mut parts = tag.split('-');
        let bias = match parts.next() {
            Some("mlp") => true,
            Some("mlp0") => false,
            _ => return Err(bad()),
        };
        let dims = parts.map(|p| p.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        let spec = Self::new(dims)?;
        Ok(if bias { spec } else { spec.without_bias() })
    }

    fn shape(&self) -> Shape<'_> {
        Shape {
            dims: &self.layer_dims,
            bias: self.bias,
        }
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig("a ranker needs at least an input and an output layer".into()));
    }
    if layer_dims.last() != Some(&1) {
        return Err(Error::InvalidConfig("the output layer must have width 1".into()));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidConfig("layer widths must be positive".into()));
    }
    Ok(())
}

/// Layer widths plus the bias flag: everything needed to walk the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape<'a> {
    dims: &'a [usize],
    bias: bool,
}

impl Shape<'_> {
    fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn block(&self, l: usize) -> usize {
        (self.dims[l] + usize::from(self.bias)) * self.dims[l + 1]
    }

    fn num_params(&self) -> usize {
        (0..self.layers()).map(|l| self.block(l)).sum()
    }
}

/// Flat parameter vector with its layer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Vec<usize>,
    bias: bool,
}

impl ParameterVector {
    /// Values for a network with biases and the given layer widths.
    pub fn from_values(layout: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::for_spec(&RankerSpec::new(layout)?, values)
    }

    pub fn for_spec(spec: &RankerSpec, values: Vec<f64>) -> Result<Self> {
        validate_dims(&spec.layer_dims)?;
        let expected = spec.num_params();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("parameter vector contains non-finite values".into()));
        }
        Ok(Self {
            values,
            layout: spec.layer_dims.clone(),
            bias: spec.bias,
        })
    }

    pub fn zeros(spec: &RankerSpec) -> Self {
        Self {
            values: vec![0.0; spec.num_params()],
            layout: spec.layer_dims.clone(),
            bias: spec.bias,
        }
    }

    pub fn spec(&self) -> RankerSpec {
        RankerSpec {
            layer_dims: self.layout.clone(),
            bias: self.bias,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn has_bias(&self) -> bool {
        self.bias
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input_dims(&self) -> usize {
        self.layout[0]
    }

    /// Same layout, new values. Used for gradients.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            layout: self.layout.clone(),
            bias: self.bias,
        }
    }

    pub(crate) fn shape(&self) -> Shape<'_> {
        Shape {
            dims: &self.layout,
            bias: self.bias,
        }
    }

    /// Order-sensitive 64-bit fingerprint of the exact bit patterns.
    pub fn checksum(&self) -> u64 {
        self.values
            .iter()
            .fold(seeding::splitmix64(self.values.len() as u64), |h, v| {
                seeding::splitmix64(h ^ v.to_bits())
            })
    }

    fn check_shape(&self, other: &ParameterVector) -> Result<()> {
        if self.layout != other.layout || self.bias != other.bias {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        Ok(())
    }
}

/// Fan-in/fan-out scaled uniform weights (bound `sqrt(6 / (fan_in + fan_out))`),
/// zero biases.
pub fn init_params(spec: &RankerSpec, seed: u64) -> ParameterVector {
    let mut rng = seeding::stream(seed, &[seeding::tag::INIT]);
    let mut values = Vec::with_capacity(spec.num_params());
    for w in spec.layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        for _ in 0..fan_in * fan_out {
            values.push(rng.random_range(-bound..bound));
        }
        if spec.bias {
            values.extend(core::iter::repeat_n(0.0, fan_out));
        }
    }
    ParameterVector::zeros(spec).with_values(values)
}

/// Per-item activations kept for the backward pass.
struct Trace<S> {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l` (post-activation
    /// for hidden layers, the score for the last).
    acts: Vec<Vec<S>>,
}

fn forward_trace<S: Real>(shape: Shape<'_>, params: &[S], x: &[f64]) -> Trace<S> {
    let dims = shape.dims;
    let n_layers = shape.layers();
    let mut acts = Vec::with_capacity(dims.len());
    acts.push(x.iter().map(|&v| S::from_f64(v)).collect::<Vec<S>>());
    let mut offset = 0;
    for l in 0..n_layers {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let weights = &params[offset..offset + fan_in * fan_out];
        let biases = &params[offset + fan_in * fan_out..offset + shape.block(l)];
        let input = &acts[l];
        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            let mut z = biases.get(o).copied().unwrap_or_else(S::zero);
            for (w, a) in row.iter().zip(input) {
                z += *w * *a;
            }
            if l + 1 < n_layers && z.value() <= 0.0 {
                z = S::zero();
            }
            out.push(z);
        }
        acts.push(out);
        offset += shape.block(l);
    }
    Trace { acts }
}

/// Accumulates `upstream * d score / d params` into `grad`.
fn backward_into<S: Real>(shape: Shape<'_>, params: &[S], trace: &Trace<S>, upstream: S, grad: &mut [S]) {
    let dims = shape.dims;
    let n_layers = shape.layers();
    let mut offsets = Vec::with_capacity(n_layers);
    let mut off = 0;
    for l in 0..n_layers {
        offsets.push(off);
        off += shape.block(l);
    }

    let mut delta: Vec<S> = vec![upstream];
    for l in (0..n_layers).rev() {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let off = offsets[l];
        let input = &trace.acts[l];
        for o in 0..fan_out {
            let d = delta[o];
            let row = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
            for (g, a) in row.iter_mut().zip(input) {
                *g += d * *a;
            }
            if shape.bias {
                grad[off + fan_in * fan_out + o] += d;
            }
        }
        if l == 0 {
            break;
        }
        // relu'(z) = 1 iff the stored activation is > 0
        let mut prev = vec![S::zero(); fan_in];
        for (o, &d) in delta.iter().enumerate() {
            let row = &params[off + o * fan_in..off + (o + 1) * fan_in];
            for (p, w) in prev.iter_mut().zip(row) {
                *p += *w * d;
            }
        }
        for (p, a) in prev.iter_mut().zip(input) {
            if a.value() <= 0.0 {
                *p = S::zero();
            }
        }
        delta = prev;
    }
}

fn check_input(params: &ParameterVector, x: &[f64]) -> Result<()> {
    if x.len() != params.input_dims() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dims(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// Forward pass for one feature vector.
pub fn score(params: &ParameterVector, features: &[f64]) -> Result<f64> {
    check_input(params, features)?;
    Ok(score_unchecked(params.shape(), &params.values, features))
}

pub fn score_items(params: &ParameterVector, items: &[&[f64]]) -> Result<Vec<f64>> {
    items.iter().map(|x| score(params, x)).collect()
}

pub(crate) fn score_unchecked<S: Real>(shape: Shape<'_>, params: &[S], x: &[f64]) -> S {
    let trace = forward_trace(shape, params, x);
    trace.acts.last().expect("at least one layer")[0]
}

/// `sum_i upstream_i * d score(x_i) / d params`, by reverse-mode accumulation.
pub fn grad_wrt_params(params: &ParameterVector, upstream: &[f64], items: &[&[f64]]) -> Result<ParameterVector> {
    if upstream.len() != items.len() {
        return Err(Error::DimensionMismatch {
            expected: items.len(),
            actual: upstream.len(),
        });
    }
    for x in items {
        check_input(params, x)?;
    }
    let mut grad = vec![0.0; params.len()];
    for (x, &g) in items.iter().zip(upstream) {
        if g == 0.0 {
            continue;
        }
        let trace = forward_trace(params.shape(), &params.values, x);
        backward_into(params.shape(), &params.values, &trace, g, &mut grad);
    }
    Ok(params.with_values(grad))
}

/// Scores every item and back-propagates the score gradients returned by
/// `loss`. Returns the loss and the parameter gradient.
pub(crate) fn loss_and_param_grad<S, F>(shape: Shape<'_>, params: &[S], items: &[&[f64]], loss: F) -> (S, Vec<S>)
where
    S: Real,
    F: FnOnce(&[S]) -> (S, Vec<S>),
{
    let traces: Vec<Trace<S>> = items.iter().map(|x| forward_trace(shape, params, x)).collect();
    let scores: Vec<S> = traces.iter().map(|t| t.acts.last().expect("output layer")[0]).collect();
    let (value, score_grad) = loss(&scores);
    let mut grad = vec![S::zero(); params.len()];
    for (trace, g) in traces.iter().zip(score_grad) {
        backward_into(shape, params, trace, g, &mut grad);
    }
    (value, grad)
}

/// `params - lr * grad` as a fresh vector.
pub fn apply_sgd_step(params: &ParameterVector, grad: &ParameterVector, lr: f64) -> Result<ParameterVector> {
    params.check_shape(grad)?;
    let values = params
        .values
        .iter()
        .zip(&grad.values)
        .map(|(p, g)| p - lr * g)
        .collect();
    Ok(params.with_values(values))
}
