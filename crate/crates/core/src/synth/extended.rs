//! Minimal double-double ("two-float") arithmetic for the extended-precision
//! normal-equations oracle. A value is an unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi)/2`, giving roughly 31 significant decimal digits.
//!
//! Only the handful of operations the oracle needs are implemented; the
//! algorithms are the classical error-free transformations (Dekker/Knuth)
//! with `fma`-based products.

use std::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Df64 {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Df64 {
    pub const ZERO: Df64 = Df64 { hi: 0.0, lo: 0.0 };

    pub fn from_f64(v: f64) -> Df64 {
        Df64 { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Df64 {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            Df64 { hi: -self.hi, lo: -self.lo }
        } else {
            self
        }
    }
}

impl Add for Df64 {
    type Output = Df64;
    fn add(self, other: Df64) -> Df64 {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Df64 { hi, lo }
    }
}

impl Sub for Df64 {
    type Output = Df64;
    fn sub(self, other: Df64) -> Df64 {
        self + Df64 { hi: -other.hi, lo: -other.lo }
    }
}

impl Mul for Df64 {
    type Output = Df64;
    fn mul(self, other: Df64) -> Df64 {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Df64 { hi, lo }
    }
}

impl Div for Df64 {
    type Output = Df64;
    fn div(self, other: Df64) -> Df64 {
        let q1 = self.hi / other.hi;
        let r = self - other * Df64::from_f64(q1);
        let q2 = r.hi / other.hi;
        let r2 = r - other * Df64::from_f64(q2);
        let q3 = r2.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Df64 { hi, lo } + Df64::from_f64(q3)
    }
}

/// Extended-precision dot product of two f64 slices.
pub fn dot(a: &[f64], b: &[f64]) -> Df64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Df64::ZERO;
    for (x, y) in a.iter().zip(b) {
        let (p, e) = two_prod(*x, *y);
        acc = acc + Df64 { hi: p, lo: e };
    }
    acc
}
