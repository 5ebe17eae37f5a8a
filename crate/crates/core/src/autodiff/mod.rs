//! Mixed-mode differentiation.
//!
//! Input derivatives (∂/∂x, ∂/∂t, ∂²/∂x²) are carried forward as [`Jet`]s.
//! Parameter gradients come from a reverse sweep: either the generic scalar
//! [`Tape`], which records every jet component as a node, or the layer-level
//! sweep in [`crate::model::batch`] used during training.
//!
//! Everything here is generic over [`Scalar`] so the same network code runs on
//! plain `f64`, on tape variables, and on double-double numbers for
//! finite-difference oracles.

mod extended;
mod jet;
mod tape;

pub use extended::Extended;
pub use jet::{jet_binary, jet_unary, BinaryOp, Jet};
pub use tape::{Tape, Var};

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{config, Error};

/// Numeric type the network and loss code is written against.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Value rounded to `f64`.
    fn value(&self) -> f64;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// Logistic function, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `(e, 1 − e)` for `e = exp(−a)`, `a ≥ 0`, both to full relative precision.
#[inline]
fn exp_neg(a: f64) -> (f64, f64) {
    if a < 0.5 {
        let m = (-a).exp_m1();
        (1.0 + m, -m)
    } else {
        let e = (-a).exp();
        (e, 1.0 - e)
    }
}

/// Sigmoid with its first three derivatives from a single exponential:
/// `σ′ = e/(1 + e)²` and `1 − 2σ = −tanh(v/2)`, `e = exp(−|v|)`, so no factor
/// is formed by cancellation.
#[inline]
fn sigmoid_derivatives(v: f64) -> [f64; 4] {
    let (e, one_minus_e) = exp_neg(v.abs());
    let p = 1.0 + e;
    let s = if v >= 0.0 { 1.0 / p } else { e / p };
    let d1 = e / (p * p);
    let half_tanh = (one_minus_e / p).copysign(v);
    [s, d1, -d1 * half_tanh, d1 * (1.0 - 6.0 * d1)]
}

/// Elementary functions a jet can be pushed through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Elementary {
    Tanh,
    Sigmoid,
    Sin,
    /// `v * sigmoid(v)`
    Swish,
    Exp,
    Negate,
    Square,
}

impl Elementary {
    pub const ALL: [Elementary; 7] = [
        Elementary::Tanh,
        Elementary::Sigmoid,
        Elementary::Sin,
        Elementary::Swish,
        Elementary::Exp,
        Elementary::Negate,
        Elementary::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Elementary::Tanh => "tanh",
            Elementary::Sigmoid => "sigmoid",
            Elementary::Sin => "sin",
            Elementary::Swish => "swish",
            Elementary::Exp => "exp",
            Elementary::Negate => "negate",
            Elementary::Square => "square",
        }
    }

    /// Plain scalar evaluation.
    pub fn eval(self, v: f64) -> f64 {
        self.derivatives(v)[0]
    }

    /// `[f, f', f'', f''']` at `v`.
    ///
    /// The third derivative is needed by the layer-level reverse sweep, which
    /// differentiates the second-order jet rule once more.
    #[inline]
    pub fn derivatives(self, v: f64) -> [f64; 4] {
        match self {
            Elementary::Tanh => {
                // tanh|v| = (1 − e)/(1 + e), sech² v = 4e/(1 + e)², e = exp(−2|v|).
                let (e, one_minus_e) = exp_neg(2.0 * v.abs());
                let p = 1.0 + e;
                let y = (one_minus_e / p).copysign(v);
                let d1 = 4.0 * e / (p * p);
                [y, d1, -2.0 * y * d1, d1 * (6.0 * y * y - 2.0)]
            }
            Elementary::Sigmoid => sigmoid_derivatives(v),
            Elementary::Sin => {
                let (s, c) = v.sin_cos();
                [s, c, -s, -c]
            }
            Elementary::Swish => {
                let [s, s1, s2, s3] = sigmoid_derivatives(v);
                [v * s, s + v * s1, 2.0 * s1 + v * s2, 3.0 * s2 + v * s3]
            }
            Elementary::Exp => {
                let e = v.exp();
                [e, e, e, e]
            }
            Elementary::Negate => [-v, -1.0, 0.0, 0.0],
            Elementary::Square => [v * v, 2.0 * v, 2.0, 0.0],
        }
    }

    /// `(f, f', f'')` as expressions in `S`, so that derivative factors are
    /// themselves differentiable (recorded on a tape, or carried in extended
    /// precision).
    pub fn apply<S: Scalar>(self, v: S) -> (S, S, S) {
        let one = S::constant(1.0);
        let two = S::constant(2.0);
        let half = S::constant(0.5);
        match self {
            Elementary::Tanh => {
                let (y, d1) = if v.value().abs() < 0.5 {
                    let y = v.tanh();
                    (y, one - y * y)
                } else {
                    // e = exp(−2|v|) gives both tanh and sech² without cancellation.
                    let e = if v.value() > 0.0 { (-(two * v)).exp() } else { (two * v).exp() };
                    let p = one + e;
                    let y = (one - e) / p;
                    let y = if v.value() > 0.0 { y } else { -y };
                    (y, S::constant(4.0) * e / (p * p))
                };
                (y, d1, -(two * y * d1))
            }
            Elementary::Sigmoid => {
                let s = v.sigmoid();
                let d1 = s * (-v).sigmoid();
                (s, d1, -(d1 * (half * v).tanh()))
            }
            Elementary::Sin => {
                let s = v.sin();
                (s, v.cos(), -s)
            }
            Elementary::Swish => {
                let s = v.sigmoid();
                let s1 = s * (-v).sigmoid();
                let s2 = -(s1 * (half * v).tanh());
                (v * s, s + v * s1, two * s1 + v * s2)
            }
            Elementary::Exp => {
                let e = v.exp();
                (e, e, e)
            }
            Elementary::Negate => (-v, S::constant(-1.0), S::constant(0.0)),
            Elementary::Square => (v * v, two * v, two),
        }
    }
}

impl fmt::Display for Elementary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Elementary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Elementary::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| config(format!("unknown elementary function `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, v: f64, h: f64) -> f64 {
        (f(v + h) - f(v - h)) / (2.0 * h)
    }

    #[test]
    fn third_derivatives_match_differences_of_second() {
        for e in Elementary::ALL {
            for &v in &[-1.7, -0.3, 0.0, 0.4, 2.1] {
                let d = e.derivatives(v);
                let fd = central(|w| e.derivatives(w)[2], v, 1e-6);
                assert!((d[3] - fd).abs() <= 1e-7 * (1.0 + d[3].abs()), "{e} at {v}");
                let fd1 = central(|w| e.derivatives(w)[0], v, 1e-6);
                assert!((d[1] - fd1).abs() <= 1e-7 * (1.0 + d[1].abs()), "{e} at {v}");
            }
        }
    }

    #[test]
    fn saturated_derivatives_keep_relative_precision() {
        let one = Extended::from(1.0);
        for &v in &[0.7, 5.0, 12.0, -15.0, 20.0] {
            let x = Extended::from(v);
            let y = x.tanh();
            let tanh_d1 = (one - y * y).value();
            let s = x.sigmoid();
            let sig_d1 = (s * (one - s)).value();
            let sig_d2 = (s * (one - s) * (one - Extended::from(2.0) * s)).value();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            assert!(rel(Elementary::Tanh.derivatives(v)[1], tanh_d1) < 1e-14, "tanh' at {v}");
            assert!(rel(Elementary::Sigmoid.derivatives(v)[1], sig_d1) < 1e-14, "sigmoid' at {v}");
            assert!(rel(Elementary::Sigmoid.derivatives(v)[2], sig_d2) < 1e-14, "sigmoid'' at {v}");
        }
    }

    #[test]
    fn generic_apply_agrees_with_table() {
        for e in Elementary::ALL {
            let v = 0.37;
            let (f, d1, d2) = e.apply(v);
            let d = e.derivatives(v);
            assert!((f - d[0]).abs() < 1e-15);
            assert!((d1 - d[1]).abs() < 1e-15);
            assert!((d2 - d[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_function_is_a_config_error() {
        assert!(matches!("relu".parse::<Elementary>(), Err(Error::Config(_))));
        assert_eq!("swish".parse::<Elementary>().unwrap(), Elementary::Swish);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
