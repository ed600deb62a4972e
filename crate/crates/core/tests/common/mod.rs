#![allow(dead_code)]

use mltr_core::ranker::ParameterVector;
use mltr_core::seeding;
use rand::Rng;

/// Independent forward pass over the flat layout. Returns the score and the
/// smallest |pre-activation| seen on a hidden unit (distance to a ReLU kink).
pub fn forward_oracle(layout: &[usize], values: &[f64], x: &[f64]) -> (f64, f64) {
    let mut act = x.to_vec();
    let mut off = 0;
    let mut min_kink = f64::INFINITY;
    let layers = layout.len() - 1;
    for l in 0..layers {
        let (fi, fo) = (layout[l], layout[l + 1]);
        let w = &values[off..off + fi * fo];
        let b = &values[off + fi * fo..off + fi * fo + fo];
        off += fi * fo + fo;
        let mut next = vec![0.0; fo];
        for o in 0..fo {
            let mut z = b[o];
            for i in 0..fi {
                z += w[o * fi + i] * act[i];
            }
            if l + 1 < layers {
                min_kink = min_kink.min(z.abs());
                next[o] = if z > 0.0 { z } else { 0.0 };
            } else {
                next[o] = z;
            }
        }
        act = next;
    }
    assert_eq!(off, values.len());
    (act[0], min_kink)
}

pub fn random_layout<R: Rng>(rng: &mut R, max_hidden_layers: usize, max_params: usize) -> Vec<usize> {
    loop {
        let hidden = rng.random_range(1..=max_hidden_layers);
        let mut layout = vec![rng.random_range(2..=8)];
        for _ in 0..hidden {
            layout.push(rng.random_range(2..=8));
        }
        layout.push(1);
        if num_params(&layout) <= max_params {
            return layout;
        }
    }
}

pub fn num_params(layout: &[usize]) -> usize {
    layout.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

pub fn random_params<R: Rng>(rng: &mut R, layout: &[usize]) -> ParameterVector {
    let values = (0..num_params(layout)).map(|_| rng.random_range(-1.0..1.0)).collect();
    ParameterVector::from_values(layout.to_vec(), values).unwrap()
}

pub fn random_rows<R: Rng>(rng: &mut R, n: usize, dims: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn rng(seed: u64) -> seeding::Rng {
    seeding::rng_from_seed(seed)
}

/// Five-point central difference of `f` at `x` for every coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let at = |p: &mut Vec<f64>, d: f64| {
                p[i] = x[i] + d;
                let v = f(p);
                p[i] = x[i];
                v
            };
            let (f2, f1, b1, b2) = (at(&mut p, 2.0 * h), at(&mut p, h), at(&mut p, -h), at(&mut p, -2.0 * h));
            (8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * h)
        })
        .collect()
}

/// Elementwise relative error with denominator max(|a|, |b|, 1e-8).
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

pub fn min_gap(scores: &[f64]) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

pub fn worst(a: &[f64], b: &[f64]) -> (usize, f64, f64) {
    let i = (0..a.len())
        .max_by(|&i, &j| {
            let e = |k: usize| (a[k] - b[k]).abs() / a[k].abs().max(b[k].abs()).max(1e-8);
            e(i).total_cmp(&e(j))
        })
        .unwrap();
    (i, a[i], b[i])
}

/// Double-double scalar (`hi + lo`, about 32 significant digits) used to push
/// finite-difference round-off far below the tolerances under test.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> DD {
    let s = a + b;
    DD { hi: s, lo: b - (s - a) }
}

impl DD {
    pub const fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn ldexp(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self { hi: self.hi * f, lo: self.lo * f }
    }
}

const LN2: DD = DD {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl std::ops::Add for DD {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl std::ops::Neg for DD {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Sub for DD {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl std::ops::Mul for DD {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl std::ops::Div for DD {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * DD::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DD::new(q2);
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2) + DD::new(q3)
    }
}

impl std::ops::AddAssign for DD {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::ops::SubAssign for DD {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl std::ops::MulAssign for DD {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl mltr_core::scalar::Real for DD {
    fn from_f64(v: f64) -> Self {
        DD::new(v)
    }

    fn value(self) -> f64 {
        self.to_f64()
    }

    fn exp(self) -> Self {
        if self.hi < -700.0 {
            return DD::new(0.0);
        }
        // x = k ln2 + r, then e^r = (e^{r / 2^8})^{2^8} with a Taylor series
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * DD::new(k)).ldexp(-8);
        let mut term = DD::new(1.0);
        let mut sum = DD::new(1.0);
        for n in 1..=20 {
            term = term * r / DD::new(n as f64);
            sum += term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..8 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    fn ln(self) -> Self {
        // Newton on e^y = x, starting from the f64 logarithm
        let mut y = DD::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - DD::new(1.0);
        }
        y
    }

    fn ln_1p(self) -> Self {
        (DD::new(1.0) + self).ln()
    }
}

pub fn dd_vec(v: &[f64]) -> Vec<DD> {
    v.iter().map(|&x| DD::new(x)).collect()
}

/// Five-point central difference evaluated in double-double. `f` receives the
/// base point as f64 and the shifted coordinate as an exact offset.
pub fn fd_gradient_dd(f: impl Fn(&[DD]) -> DD, x: &[f64], h: f64) -> Vec<f64> {
    let base = dd_vec(x);
    let mut p = base.clone();
    (0..x.len())
        .map(|i| {
            let mut at = |d: f64| {
                p[i] = base[i] + DD::new(d);
                let v = f(&p);
                p[i] = base[i];
                v
            };
            let (f2, f1, b1, b2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            ((DD::new(8.0) * (f1 - b1) - (f2 - b2)) / DD::new(12.0 * h)).to_f64()
        })
        .collect()
}
