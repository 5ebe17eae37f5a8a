//! Total loss of one epoch's batch and its parameter gradient.
//!
//! Residual weights ω are computed from the current prediction and then held
//! fixed: they scale the residuals but are not differentiated.

use crate::autodiff::Scalar;
use crate::error::{usage, Result};
use crate::model::batch::{Order, Workspace};
use crate::model::{ModelKind, Network};
use crate::physics::{reaction, reaction_derivative, weight, FisherProblem};
use crate::sampling::SampleBatch;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    /// Absent for data-only models.
    pub physics: Option<f64>,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.data.is_finite() && self.physics.map_or(true, f64::is_finite)
    }
}

fn check_batch(kind: ModelKind, batch: &SampleBatch) -> Result<()> {
    if batch.labeled.is_empty() {
        return Err(usage("batch has no labeled points"));
    }
    if kind.uses_physics() && batch.collocation.is_empty() {
        return Err(usage("physics-informed model needs collocation points"));
    }
    Ok(())
}

/// Reusable buffers for [`Objective::loss_and_gradient`].
#[derive(Clone, Debug, Default)]
pub struct Objective {
    labeled: Workspace,
    collocation: Workspace,
    points: Vec<crate::sampling::Point>,
    adjoint: Vec<f64>,
    weights: Vec<f64>,
}

impl Objective {
    pub fn new() -> Self {
        Self::default()
    }

    /// Residual weights of the last evaluated collocation batch.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Losses at `params`; their gradient is written into `grad`.
    pub fn loss_and_gradient(
        &mut self,
        net: &Network,
        problem: &FisherProblem,
        kind: ModelKind,
        params: &[f64],
        batch: &SampleBatch,
        grad: &mut [f64],
    ) -> Result<LossBreakdown> {
        check_batch(kind, batch)?;
        grad.iter_mut().for_each(|g| *g = 0.0);

        // Data term: (1/N) Σ (u_θ − u)².
        self.points.clear();
        self.points.extend(batch.labeled.iter().map(|l| l.point));
        net.forward_batch(params, &self.points, Order::Value, &mut self.labeled);
        let n = batch.labeled.len() as f64;
        self.adjoint.clear();
        let mut data = 0.0;
        for (u, l) in self.labeled.values().iter().zip(&batch.labeled) {
            let e = u - l.target;
            data += e * e;
            self.adjoint.push(2.0 * e / n);
        }
        data /= n;
        net.backward_batch(params, &mut self.labeled, &self.adjoint, grad);

        self.weights.clear();
        if !kind.uses_physics() {
            return Ok(LossBreakdown { total: data, data, physics: None });
        }

        // Physics term: (1/N_col) Σ (ω f)², ω frozen.
        let m = batch.collocation.len();
        net.forward_batch(params, &batch.collocation, Order::Jet, &mut self.collocation);
        self.adjoint.clear();
        self.adjoint.resize(4 * m, 0.0);
        let mut physics = 0.0;
        for (i, p) in batch.collocation.iter().enumerate() {
            let jet = self.collocation.jet(i);
            let f = jet.dt - problem.mu * jet.dxx - reaction(jet.v, p.rho);
            let w = weight(jet.v, p.rho, problem.lambda);
            self.weights.push(w);
            physics += (w * f) * (w * f);
            let fbar = 2.0 * w * w * f / m as f64;
            self.adjoint[i] = -reaction_derivative(jet.v, p.rho) * fbar;
            self.adjoint[2 * m + i] = fbar;
            self.adjoint[3 * m + i] = -problem.mu * fbar;
        }
        physics /= m as f64;
        net.backward_batch(params, &mut self.collocation, &self.adjoint, grad);

        Ok(LossBreakdown { total: data + physics, data, physics: Some(physics) })
    }
}

/// Residual weights at `params` for every collocation point of `batch`.
pub fn frozen_weights(net: &Network, problem: &FisherProblem, params: &[f64], batch: &SampleBatch) -> Vec<f64> {
    batch
        .collocation
        .iter()
        .map(|p| weight(net.eval(params, p).v, p.rho, problem.lambda))
        .collect()
}

/// The same total loss written pointwise in any scalar type, with the
/// residual weights supplied. Used as the reference for the batched path:
/// on a [`crate::autodiff::Tape`] it yields the reverse-mode gradient, in
/// extended precision it feeds finite differences.
pub fn total_loss_generic<S: Scalar>(
    net: &Network,
    problem: &FisherProblem,
    kind: ModelKind,
    params: &[S],
    batch: &SampleBatch,
    weights: &[f64],
) -> Result<S> {
    check_batch(kind, batch)?;
    let c = S::constant;
    let mut data = c(0.0);
    for l in &batch.labeled {
        let e = net.eval_value(params, &l.point) - c(l.target);
        data = data + e * e;
    }
    let mut total = data * c(1.0 / batch.labeled.len() as f64);
    if kind.uses_physics() {
        if weights.len() != batch.collocation.len() {
            return Err(usage("one residual weight per collocation point required"));
        }
        let mut physics = c(0.0);
        for (p, &w) in batch.collocation.iter().zip(weights) {
            let jet = net.eval(params, p);
            let u = jet.v;
            let f = jet.dt - c(problem.mu) * jet.dxx - c(p.rho) * u * (c(1.0) - u);
            let wf = c(w) * f;
            physics = physics + wf * wf;
        }
        total = total + physics * c(1.0 / batch.collocation.len() as f64);
    }
    Ok(total)
}
