//! Paired two-tailed t-test.
//!
//! The Student-t tail is evaluated through the regularized incomplete beta
//! function: for `nu` degrees of freedom,
//! `P(|T| >= |t|) = I_{nu / (nu + t^2)}(nu / 2, 1 / 2)`.

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    /// `mean(d) / (sd(d) / sqrt(n))` for `d = a - b`. Infinite (signed) when the
    /// differences have zero variance and a non-zero mean; 0 when all are zero.
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub significant_at_0_01: bool,
    pub mean_difference: f64,
    /// All differences identical: the statistic is undefined and the p-value is
    /// set by convention (1 for a zero mean difference, 0 otherwise).
    pub zero_variance: bool,
}

pub fn paired_t_test(sample_a: &[f64], sample_b: &[f64]) -> Result<TTestResult> {
    if sample_a.len() != sample_b.len() {
        return Err(Error::InvalidBatch(alloc::format!(
            "paired samples differ in length: {} vs {}",
            sample_a.len(),
            sample_b.len()
        )));
    }
    let n = sample_a.len();
    if n < 2 {
        return Err(Error::InvalidBatch("paired t-test needs at least 2 pairs".into()));
    }
    let dof = n - 1;
    let diffs = sample_a.iter().zip(sample_b).map(|(a, b)| a - b);
    let mean = diffs.clone().sum::<f64>() / n as f64;
    let ss: f64 = diffs.clone().map(|d| (d - mean) * (d - mean)).sum();
    let first = sample_a[0] - sample_b[0];
    let all_equal = diffs.clone().all(|d| d == first);

    if all_equal || ss == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(TTestResult {
            t_statistic: t,
            degrees_of_freedom: dof,
            p_value: p,
            significant_at_0_01: p < SIGNIFICANCE_LEVEL,
            mean_difference: mean,
            zero_variance: true,
        });
    }

    let sd = libm::sqrt(ss / dof as f64);
    let t = mean / (sd / libm::sqrt(n as f64));
    let p = student_t_two_tailed(t, dof as f64);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: dof,
        p_value: p,
        significant_at_0_01: p < SIGNIFICANCE_LEVEL,
        mean_difference: mean,
        zero_variance: false,
    })
}

/// `P(|T| >= |t|)` for Student's t with `nu` degrees of freedom.
pub fn student_t_two_tailed(t: f64, nu: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = nu / (nu + t * t);
    regularized_incomplete_beta(x, nu / 2.0, 0.5).clamp(0.0, 1.0)
}

/// `I_x(a, b)` via the Lentz continued fraction, using the symmetry
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` where it converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
