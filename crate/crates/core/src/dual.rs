//! Hyper-dual numbers for exact first and second derivatives.
//!
//! A hyper-dual number `a + b·e1 + c·e2 + d·e1e2` with `e1² = e2² = 0`
//! carries the value, two independent directional derivatives and the
//! mixed second derivative. Seeding `e1` along coordinate `i` and `e2`
//! along `j` yields `∂f/∂x_i` in `e1` and `∂²f/∂x_i∂x_j` in `e12`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal real-number interface shared by `f64` and [`HyperDual`].
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// Real part, used for branch decisions.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    pub fn constant(re: f64) -> Self {
        Self::new(re, 0.0, 0.0, 0.0)
    }

    /// Applies a scalar function given its value and first two derivatives at `re`.
    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self { re: f, e1: df * self.e1, e2: df * self.e2, e12: df * self.e12 + d2f * self.e1 * self.e2 }
    }
}

impl Add for HyperDual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let recip = o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
        self * recip
    }
}

impl Neg for HyperDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Scalar for HyperDual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    fn scale(self, c: f64) -> Self {
        Self::new(self.re * c, self.e1 * c, self.e2 * c, self.e12 * c)
    }
}

/// Value, gradient and Hessian of `f` at `x`, exact up to rounding.
///
/// Costs `n(n+1)/2` evaluations of `f` on hyper-dual arguments.
pub fn hessian<F, E>(f: F, x: &[f64]) -> std::result::Result<(f64, Vec<f64>, Vec<Vec<f64>>), E>
where
    F: Fn(&[HyperDual]) -> std::result::Result<HyperDual, E>,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    let mut value = 0.0;
    let mut args: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    for i in 0..n {
        for j in i..n {
            args[i].e1 = 1.0;
            args[j].e2 = 1.0;
            let r = f(&args)?;
            args[i].e1 = 0.0;
            args[j].e2 = 0.0;
            if i == j {
                grad[i] = r.e1;
                value = r.re;
            }
            hess[i][j] = r.e12;
            hess[j][i] = r.e12;
        }
    }
    if n == 0 {
        value = f(&args)?.re;
    }
    Ok((value, grad, hess))
}

/// Value and gradient of `f` at `x` (n evaluations).
pub fn gradient<F, E>(f: F, x: &[f64]) -> std::result::Result<(f64, Vec<f64>), E>
where
    F: Fn(&[HyperDual]) -> std::result::Result<HyperDual, E>,
{
    let mut args: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    let mut grad = vec![0.0; x.len()];
    let mut value = 0.0;
    for i in 0..x.len() {
        args[i].e1 = 1.0;
        let r = f(&args)?;
        args[i].e1 = 0.0;
        grad[i] = r.e1;
        value = r.re;
    }
    if x.is_empty() {
        value = f(&args)?.re;
    }
    Ok((value, grad))
}
