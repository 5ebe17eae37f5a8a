use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Elementary, Scalar};
use crate::error::{usage, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Records scalar operations for a reverse sweep.
///
/// Nodes are appended in evaluation order, so the reverse sweep is simply a
/// backwards walk over the node list. Constants are not recorded.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    parameter_slots: RefCell<Vec<u32>>,
}

/// A scalar that is either a constant or a node on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes and parameter registrations.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.parameter_slots.get_mut().clear();
    }

    /// Records an independent leaf variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Node { parents: [NONE, NONE], partials: [0.0, 0.0] });
        Var { tape: Some(self), index, value }
    }

    /// Records leaves for a whole parameter vector and registers them, in
    /// order, as the slots reported by [`Tape::gradient`].
    pub fn parameters(&self, values: &[f64]) -> Vec<Var<'_>> {
        let vars: Vec<_> = values.iter().map(|&v| self.var(v)).collect();
        self.parameter_slots
            .borrow_mut()
            .extend(vars.iter().map(|v| v.index));
        vars
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        assert!(index != NONE, "tape exceeds u32 nodes");
        nodes.push(node);
        index
    }

    /// Adjoints of `loss` with respect to every registered parameter slot.
    pub fn gradient(&self, loss: Var<'_>) -> Result<Vec<f64>> {
        let slots = self.parameter_slots.borrow();
        let adjoints = self.adjoints(loss)?;
        Ok(slots.iter().map(|&s| adjoints[s as usize]).collect())
    }

    /// Adjoints of `loss` with respect to the given variables.
    pub fn gradient_wrt(&self, loss: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>> {
        let adjoints = self.adjoints(loss)?;
        wrt.iter()
            .map(|v| match v.tape {
                Some(t) if std::ptr::eq(t, self) => Ok(adjoints[v.index as usize]),
                _ => Err(usage("differentiation variable is not on this tape")),
            })
            .collect()
    }

    fn adjoints(&self, loss: Var<'_>) -> Result<Vec<f64>> {
        match loss.tape {
            Some(t) if std::ptr::eq(t, self) => {}
            _ => return Err(usage("loss was not recorded on this tape")),
        }
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[loss.index as usize] = 1.0;
        for i in (0..=loss.index as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NONE {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        Ok(adj)
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var { tape: None, index: NONE, value }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(tape) => {
                let index = tape.push(Node { parents: [self.index, NONE], partials: [partial, 0.0] });
                Var { tape: Some(tape), index, value }
            }
        }
    }

    fn binary(self, rhs: Self, value: f64, dl: f64, dr: f64) -> Self {
        let tape = match (self.tape, rhs.tape) {
            (None, None) => return Var::constant(value),
            (Some(a), Some(b)) => {
                assert!(std::ptr::eq(a, b), "operands recorded on different tapes");
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
        };
        let index = tape.push(Node { parents: [self.index, rhs.index], partials: [dl, dr] });
        Var { tape: Some(tape), index, value }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl Scalar for Var<'_> {
    fn constant(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn tanh(self) -> Self {
        let [y, d1, ..] = Elementary::Tanh.derivatives(self.value);
        self.unary(y, d1)
    }

    fn sigmoid(self) -> Self {
        let [s, d1, ..] = Elementary::Sigmoid.derivatives(self.value);
        self.unary(s, d1)
    }

    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{jet_unary, Elementary, Jet};

    #[test]
    fn square_has_gradient_six_at_three() {
        let tape = Tape::new();
        let theta = tape.parameters(&[3.0]);
        let loss = theta[0] * theta[0];
        assert_eq!(tape.gradient(loss).unwrap(), vec![6.0]);
    }

    #[test]
    fn independent_parameter_has_exactly_zero_gradient() {
        let tape = Tape::new();
        let p = tape.parameters(&[1.5, -2.0]);
        let loss = p[0].tanh() * p[0];
        let g = tape.gradient(loss).unwrap();
        assert_eq!(g[1], 0.0);
        assert!(g[0] != 0.0);
    }

    #[test]
    fn foreign_or_constant_loss_is_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let x = b.var(2.0);
        assert!(a.gradient(x * x).is_err());
        assert!(a.gradient(Var::constant(1.0)).is_err());
    }

    #[test]
    fn differentiates_through_jet_components() {
        // d/dθ of the x-second-derivative of tanh(θ·x) at x = 0.4:
        // u_xx = θ² · tanh''(θx).
        let tape = Tape::new();
        let theta = tape.parameters(&[1.3])[0];
        let x = Jet::<Var>::seed_x(Var::constant(0.4), 1.0);
        let u = jet_unary(Elementary::Tanh, x.scale(theta));
        let g = tape.gradient(u.dxx).unwrap()[0];

        let f = |th: f64| {
            let y = (th * 0.4).tanh();
            th * th * (-2.0 * y * (1.0 - y * y))
        };
        let h = 1e-6;
        let fd = (f(1.3 + h) - f(1.3 - h)) / (2.0 * h);
        assert!((g - fd).abs() < 1e-8, "{g} vs {fd}");
    }

    #[test]
    fn clear_resets_everything() {
        let mut tape = Tape::new();
        {
            let p = tape.parameters(&[1.0]);
            let _ = p[0] * p[0];
        }
        assert_eq!(tape.len(), 2);
        tape.clear();
        assert!(tape.is_empty());
        let p = tape.parameters(&[2.0]);
        assert_eq!(tape.gradient(p[0] * p[0]).unwrap(), vec![4.0]);
    }
}
