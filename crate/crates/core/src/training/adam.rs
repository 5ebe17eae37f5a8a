use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    /// Zero moments with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(n: usize) -> Self {
        OptimizerState { m: vec![0.0; n], v: vec![0.0; n], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient component was NaN or infinite; nothing was changed.
    NonFinite,
}

/// One Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState, lr: f64) -> Result<StepOutcome> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.m.len() != state.v.len() {
        return Err(usage(format!(
            "adam length mismatch: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::NonFinite);
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powf(state.step as f64);
    let c2 = 1.0 - b2.powf(state.step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + state.eps);
    }
    Ok(StepOutcome::Applied)
}

/// Staircase exponential decay `lr0 · rate^⌊epoch / steps⌋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub rate: f64,
    pub steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { lr0: 1e-3, rate: 0.95, steps: 1000 }
    }
}

impl LrSchedule {
    pub fn lr(&self, epoch: u64) -> f64 {
        self.lr0 * self.rate.powi((epoch / self.steps.max(1)) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_examples() {
        let s = LrSchedule::default();
        assert_eq!(s.lr(0), 0.001);
        assert_eq!(s.lr(999), 0.001);
        assert!((s.lr(1000) - 0.00095).abs() < 1e-18);
        assert!((s.lr(5000) - 7.7378e-4).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.3, -1.2];
        let mut s = OptimizerState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1e-3).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_about_lr() {
        let mut p = vec![1.0];
        let mut s = OptimizerState::new(1);
        adam_step(&mut p, &[0.37], &mut s, 1e-3).unwrap();
        let expected = 1.0 - 1e-3 * 0.37 / (0.37 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-10);
    }

    /// Recurrence evaluated directly as the oracle.
    #[test]
    fn two_constant_steps_match_recurrence() {
        let g = 2.5;
        let lr = 1e-2;
        let mut p = vec![0.0];
        let mut s = OptimizerState::new(1);
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
        for k in 1..=2 {
            let before = p[0];
            adam_step(&mut p, &[g], &mut s, lr).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(k));
            let vh = v / (1.0 - 0.999f64.powi(k));
            theta -= lr * mh / (vh.sqrt() + 1e-8);
            assert!((p[0] - theta).abs() < 1e-15);
            assert!((p[0] - before).abs() <= lr);
        }
    }

    #[test]
    fn non_finite_gradient_is_flagged_without_update() {
        let mut p = vec![1.0, 2.0];
        let mut s = OptimizerState::new(2);
        assert_eq!(adam_step(&mut p, &[f64::NAN, 1.0], &mut s, 1e-3).unwrap(), StepOutcome::NonFinite);
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
        assert!(adam_step(&mut p, &[1.0], &mut s, 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn step_is_bounded_by_lr(g in proptest::collection::vec(-1e6f64..1e6, 1..8), steps in 1usize..20) {
            let n = g.len();
            let mut p = vec![0.0; n];
            let mut s = OptimizerState::new(n);
            for _ in 0..steps {
                let before = p.clone();
                adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
                for (a, b) in p.iter().zip(&before) {
                    prop_assert!((a - b).abs() <= 1e-3 * (1.0 + 1e-12));
                }
            }
            prop_assert_eq!(s.step, steps as u64);
        }
    }
}
