use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

use super::Scalar;

/// Double-double scalar (about 32 significant digits).
///
/// Only used to evaluate finite-difference oracles: with a step of 1e-5 the
/// rounding error of plain `f64` differences is ~1e-11 relative to the loss,
/// which is larger than the tolerances the gradient checks assert.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Extended(pub TwoFloat);

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended(TwoFloat::from(v))
    }
}

impl Add for Extended {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Extended(self.0 + rhs.0)
    }
}

impl Sub for Extended {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Extended(self.0 - rhs.0)
    }
}

impl Mul for Extended {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Extended(self.0 * rhs.0)
    }
}

impl Div for Extended {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Extended(div(self.0, rhs.0))
    }
}

impl Neg for Extended {
    type Output = Self;
    fn neg(self) -> Self {
        Extended(-self.0)
    }
}

impl Scalar for Extended {
    fn constant(v: f64) -> Self {
        Extended::from(v)
    }

    fn value(&self) -> f64 {
        self.0.hi() + self.0.lo()
    }

    fn tanh(self) -> Self {
        // Beyond |v| = 40 tanh is ±1 to well below double-double resolution.
        let v = self.0.hi();
        if v.abs() > 40.0 {
            return Extended::from(v.signum());
        }
        // tanh|v| = m / (m + 2) with m = e^{2|v|} − 1, free of cancellation.
        let a = if v < 0.0 { -self.0 } else { self.0 };
        let m = expm1(a * 2.0);
        let t = div(m, m + 2.0);
        Extended(if v < 0.0 { -t } else { t })
    }

    fn sigmoid(self) -> Self {
        let one = TwoFloat::from(1.0);
        if self.0.hi() >= 0.0 {
            Extended(div(one, one + exp(-self.0)))
        } else {
            let e = exp(self.0);
            Extended(div(e, one + e))
        }
    }

    fn sin(self) -> Self {
        Extended(self.0.sin())
    }

    fn cos(self) -> Self {
        Extended(self.0.cos())
    }

    fn exp(self) -> Self {
        Extended(exp(self.0))
    }
}

/// Long division with three quotient digits. `TwoFloat`'s own division
/// forms its correction term without a fused multiply-add and loses the low
/// word (it returns 1/3 with a zero low part).
fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::from(q1) + q2 + q3
}

const LN2: (f64, f64) = (std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);
const HALVINGS: i32 = 9;

/// `(p, k)` with `e^x = (1 + p) · 2^k`.
///
/// `x = k ln2 + r` with `|r| ≤ ln2/2`, then `expm1(r / 2⁹)` by a nine-term Taylor series
/// and nine doublings `p ← 2p + p²`, which keep the small `p` exact.
fn exp_parts(x: TwoFloat) -> (TwoFloat, i32) {
    let k = (x.hi() / LN2.0).round();
    let r = x - TwoFloat::from(LN2.0) * k - TwoFloat::from(LN2.1) * k;
    let r = r / f64::powi(2.0, HALVINGS);
    let mut term = r;
    let mut p = r;
    for n in 2..=9 {
        term = term * r / n as f64;
        p += term;
    }
    for _ in 0..HALVINGS {
        p = p * 2.0 + p * p;
    }
    (p, k as i32)
}

fn exp(x: TwoFloat) -> TwoFloat {
    if x.hi() > 709.0 {
        return TwoFloat::from(f64::INFINITY);
    }
    if x.hi() < -745.0 {
        return TwoFloat::from(0.0);
    }
    let (p, k) = exp_parts(x);
    // Split the scale so neither factor overflows near the range ends.
    let half = k / 2;
    (p + 1.0) * f64::powi(2.0, half) * f64::powi(2.0, k - half)
}

fn expm1(x: TwoFloat) -> TwoFloat {
    let (p, k) = exp_parts(x);
    if k == 0 {
        p
    } else {
        (p + 1.0) * f64::powi(2.0, k) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_with_f64_functions() {
        for &v in &[-3.2, -0.5, 0.1, 1.3, 4.0] {
            let e = Extended::from(v);
            assert!((e.tanh().value() - v.tanh()).abs() < 1e-15);
            assert!((e.sigmoid().value() - crate::autodiff::sigmoid(v)).abs() < 1e-15);
            assert!((e.sin().value() - v.sin()).abs() < 1e-15);
            assert!((e.exp().value() - v.exp()).abs() < 1e-15 * v.exp());
        }
    }

    #[test]
    fn exp_and_tanh_obey_identities_to_double_double_accuracy() {
        for &(a, b) in &[(0.3, 0.7), (1.3, 1e-5), (-2.0, 0.5), (-1.5, -3.25), (20.0, 0.125)] {
            let (ea, eb) = (Extended::from(a), Extended::from(b));
            let lhs = (ea + eb).exp();
            let rel = (lhs - ea.exp() * eb.exp()).value() / lhs.value();
            assert!(rel.abs() < 1e-28, "exp({a}+{b}): {rel:e}");
            let t = ea.tanh();
            let e2 = (Extended::from(2.0) * ea).exp();
            let t2 = (e2 - Extended::from(1.0)) / (e2 + Extended::from(1.0));
            assert!(((t - t2).value() / t.value()).abs() < 1e-27, "tanh({a})");
        }
        let third = Extended::from(1.0) / Extended::from(3.0);
        assert!((third * Extended::from(3.0) - Extended::from(1.0)).value().abs() < 1e-31);
        let tiny = Extended::from(1e-20).tanh();
        assert!((tiny.value() - 1e-20).abs() < 1e-50);
        assert_eq!(Extended::from(800.0).exp().value(), f64::INFINITY);
        assert_eq!(Extended::from(-800.0).exp().value(), 0.0);
    }

    #[test]
    fn carries_more_than_double_precision() {
        // 1 + 1e-20 - 1 vanishes in f64 but not here.
        let tiny = Extended::from(1e-20);
        let back = (Extended::from(1.0) + tiny) - Extended::from(1.0);
        assert!((back.value() - 1e-20).abs() < 1e-30);
        // tanh(x) - x ~ -x³/3 at small x, resolved beyond f64.
        let x = Extended::from(1e-4);
        let d = (x.tanh() - x).value();
        assert!((d + 1e-12 / 3.0).abs() < 1e-20);
    }
}
