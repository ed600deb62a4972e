//! Scalar abstraction shared by the network, the losses and the meta-gradient.
//!
//! Forward and backward passes are written once over [`Real`]. Running them on
//! `f64` gives values and gradients; running them on [`Dual`] seeded with a
//! direction `v` in parameter space additionally carries the directional
//! derivative of every intermediate, which turns the reverse-mode gradient into
//! an exact Hessian-vector product (forward-over-reverse).

use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + core::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(v: f64) -> Self;
    /// Primal value. Branches (ReLU, ranking, max-subtraction) look only at this.
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        libm::log1p(self)
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// First-order dual number `re + du·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub const fn new(re: f64, du: f64) -> Self {
        Self { re, du }
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.du - q * o.du) / o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.du)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Real for Dual {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::new(v, 0.0)
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
    #[inline]
    fn exp(self) -> Self {
        let e = libm::exp(self.re);
        Self::new(e, e * self.du)
    }
    #[inline]
    fn ln(self) -> Self {
        Self::new(libm::log(self.re), self.du / self.re)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        Self::new(libm::log1p(self.re), self.du / (1.0 + self.re))
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        Self::new(self.re * c, self.du * c)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<S: Real>(x: S) -> S {
    if x.value() >= 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-x})` without overflow.
pub fn sigmoid<S: Real>(x: S) -> S {
    let one = S::from_f64(1.0);
    if x.value() >= 0.0 {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_tracks_derivative_of_composite() {
        // d/dx [ln(1 + e^{2x}) * x] at x = 0.3
        let f = |x: Dual| softplus(x * Dual::from_f64(2.0)) * x;
        let x = 0.3;
        let d = f(Dual::new(x, 1.0));
        let h = 1e-6;
        let fd = (f(Dual::from_f64(x + h)).re - f(Dual::from_f64(x - h)).re) / (2.0 * h);
        assert!((d.du - fd).abs() < 1e-8);
    }

    #[test]
    fn softplus_and_sigmoid_are_stable_at_extremes() {
        assert_eq!(softplus(800.0_f64), 800.0);
        assert!(softplus(-800.0_f64) >= 0.0);
        assert_eq!(sigmoid(-800.0_f64), 0.0);
        assert_eq!(sigmoid(800.0_f64), 1.0);
        assert!((softplus(0.0_f64) - core::f64::consts::LN_2).abs() < 1e-15);
    }
}
