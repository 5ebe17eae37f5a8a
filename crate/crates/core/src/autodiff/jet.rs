use std::ops::{Add, Mul, Sub};

use super::{Elementary, Scalar};

/// A value together with its first derivatives in x and t and its second
/// derivative in x, all with respect to physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S> {
    pub v: S,
    pub dx: S,
    pub dt: S,
    pub dxx: S,
}

impl<S: Scalar> Jet<S> {
    pub fn new(v: S, dx: S, dt: S, dxx: S) -> Self {
        Jet { v, dx, dt, dxx }
    }

    /// A jet with vanishing derivatives.
    pub fn constant(v: S) -> Self {
        let zero = S::constant(0.0);
        Jet { v, dx: zero, dt: zero, dxx: zero }
    }

    /// Seed for the spatial input: `(x_scaled, s_x, 0, 0)` where `s_x` is
    /// `d x_scaled / d x`.
    pub fn seed_x(scaled: S, s_x: f64) -> Self {
        let zero = S::constant(0.0);
        Jet { v: scaled, dx: S::constant(s_x), dt: zero, dxx: zero }
    }

    /// Seed for the temporal input: `(t_scaled, 0, s_t, 0)`.
    pub fn seed_t(scaled: S, s_t: f64) -> Self {
        let zero = S::constant(0.0);
        Jet { v: scaled, dx: zero, dt: S::constant(s_t), dxx: zero }
    }

    /// Multiplies every component by a scalar.
    pub fn scale(self, c: S) -> Self {
        Jet { v: self.v * c, dx: self.dx * c, dt: self.dt * c, dxx: self.dxx * c }
    }

    /// Adds a scalar to the value only.
    pub fn shift(self, c: S) -> Self {
        Jet { v: self.v + c, ..self }
    }

    pub fn map(self, f: Elementary) -> Self {
        jet_unary(f, self)
    }

    pub fn values(&self) -> [f64; 4] {
        [self.v.value(), self.dx.value(), self.dt.value(), self.dxx.value()]
    }
}

impl Jet<f64> {
    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|c| c.is_finite())
    }
}

/// Chain rule through `f`:
/// `(f(v), f'(v)·dx, f'(v)·dt, f''(v)·dx² + f'(v)·dxx)`.
pub fn jet_unary<S: Scalar>(f: Elementary, u: Jet<S>) -> Jet<S> {
    let (y, d1, d2) = f.apply(u.v);
    Jet {
        v: y,
        dx: d1 * u.dx,
        dt: d1 * u.dt,
        dxx: d2 * u.dx * u.dx + d1 * u.dxx,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

pub fn jet_binary<S: Scalar>(op: BinaryOp, u: Jet<S>, w: Jet<S>) -> Jet<S> {
    match op {
        BinaryOp::Add => Jet {
            v: u.v + w.v,
            dx: u.dx + w.dx,
            dt: u.dt + w.dt,
            dxx: u.dxx + w.dxx,
        },
        BinaryOp::Sub => Jet {
            v: u.v - w.v,
            dx: u.dx - w.dx,
            dt: u.dt - w.dt,
            dxx: u.dxx - w.dxx,
        },
        BinaryOp::Mul => {
            let two = S::constant(2.0);
            Jet {
                v: u.v * w.v,
                dx: u.dx * w.v + u.v * w.dx,
                dt: u.dt * w.v + u.v * w.dt,
                dxx: u.dxx * w.v + two * u.dx * w.dx + u.v * w.dxx,
            }
        }
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Jet<S>;
    fn add(self, rhs: Self) -> Self {
        jet_binary(BinaryOp::Add, self, rhs)
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Jet<S>;
    fn sub(self, rhs: Self) -> Self {
        jet_binary(BinaryOp::Sub, self, rhs)
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Jet<S>;
    fn mul(self, rhs: Self) -> Self {
        jet_binary(BinaryOp::Mul, self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Extended;
    use proptest::prelude::*;

    fn j(v: f64, dx: f64, dt: f64, dxx: f64) -> Jet<f64> {
        Jet::new(v, dx, dt, dxx)
    }

    fn close(a: [f64; 4], b: [f64; 4]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn unary_examples() {
        assert!(close(jet_unary(Elementary::Tanh, j(0.0, 1.0, 0.0, 0.0)).values(), [0.0, 1.0, 0.0, 0.0]));
        assert!(close(jet_unary(Elementary::Square, j(2.0, 1.0, 0.0, 0.0)).values(), [4.0, 4.0, 0.0, 2.0]));
        assert!(close(jet_unary(Elementary::Sigmoid, j(0.0, 3.0, 2.0, 0.0)).values(), [0.5, 0.75, 0.5, 0.0]));
    }

    #[test]
    fn binary_examples() {
        let x = j(3.0, 1.0, 0.0, 0.0);
        assert!(close((x * x).values(), [9.0, 6.0, 0.0, 2.0]));
        assert!(close((j(1.0, 1.0, 0.0, 0.0) + j(2.0, 0.0, 1.0, 0.0)).values(), [3.0, 1.0, 1.0, 0.0]));
        let w = j(0.3, -1.2, 0.7, 2.5);
        let scaled = Jet::constant(4.0) * w;
        assert!(close(scaled.values(), [1.2, -4.8, 2.8, 10.0]));
    }

    #[test]
    fn constants_stay_constant() {
        for f in Elementary::ALL {
            let out = jet_unary(f, Jet::constant(0.8));
            assert_eq!([out.dx, out.dt, out.dxx], [0.0, 0.0, 0.0], "{f}");
        }
    }

    /// The scalar function of (x, t) used for the finite-difference check:
    /// the jet input is u(x, t) = a·x + b·t + c·x², pushed through f.
    fn composite<S: Scalar>(f: Elementary, x: S, t: S, coef: [f64; 3]) -> S {
        let c = |v: f64| S::constant(v);
        let inner = c(coef[0]) * x + c(coef[1]) * t + c(coef[2]) * x * x;
        f.apply(inner).0
    }

    fn fd_checks(f: Elementary, x: f64, t: f64, coef: [f64; 3]) -> Result<(), TestCaseError> {
        // Input jet of the inner polynomial at (x, t).
        let inner = Jet::new(
            coef[0] * x + coef[1] * t + coef[2] * x * x,
            coef[0] + 2.0 * coef[2] * x,
            coef[1],
            2.0 * coef[2],
        );
        let out = jet_unary(f, inner);
        prop_assert!(out.is_finite());

        // Oracle: central differences of the composite, evaluated in
        // double-double so that rounding does not swamp the step.
        let h = Extended::from(1e-5);
        let xe = Extended::from(x);
        let te = Extended::from(t);
        let g = |xx: Extended, tt: Extended| composite(f, xx, tt, coef);
        let two = Extended::from(2.0);
        let d_x = (g(xe + h, te) - g(xe - h, te)) / (two * h);
        let d_t = (g(xe, te + h) - g(xe, te - h)) / (two * h);
        let d_xx = (g(xe + h, te) - two * g(xe, te) + g(xe - h, te)) / (h * h);
        for (ad, fd) in [(out.dx, d_x.value()), (out.dt, d_t.value()), (out.dxx, d_xx.value())] {
            let scale = ad.abs().max(fd.abs());
            if scale > 1e-8 {
                prop_assert!((ad - fd).abs() / scale <= 1e-6, "{f}: ad={ad} fd={fd}");
            }
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn unary_jets_match_finite_differences(
            fi in 0usize..7,
            x in -2.0f64..2.0,
            t in -2.0f64..2.0,
            a in -1.5f64..1.5,
            b in -1.5f64..1.5,
            c in -0.8f64..0.8,
        ) {
            fd_checks(Elementary::ALL[fi], x, t, [a, b, c])?;
        }

        #[test]
        fn mul_obeys_leibniz(
            u in proptest::array::uniform4(-3.0f64..3.0),
            w in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let (a, b) = (j(u[0], u[1], u[2], u[3]), j(w[0], w[1], w[2], w[3]));
            let p = a * b;
            prop_assert!((p.dxx - (u[3] * w[0] + 2.0 * u[1] * w[1] + u[0] * w[3])).abs() < 1e-12);
            prop_assert!((p.dx - (u[1] * w[0] + u[0] * w[1])).abs() < 1e-12);
        }
    }
}
