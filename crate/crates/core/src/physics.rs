//! Fisher's equation `u_t - μ u_xx = ρ u (1 - u)`, its traveling-wave
//! solution, the residual, the reaction-based residual weights and the loss
//! terms built from them.

use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Jet};
use crate::error::{config, usage, Result};
use crate::sampling::{Domain, Point};

/// Diffusion coefficient used throughout the experiments.
pub const DEFAULT_MU: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherProblem {
    pub domain: Domain,
    pub mu: f64,
    /// Residual weighting strength; 0 disables weighting.
    pub lambda: f64,
}

impl FisherProblem {
    pub fn new(domain: Domain, mu: f64, lambda: f64) -> Result<Self> {
        let p = FisherProblem { domain, mu, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn is_generalizing(&self) -> bool {
        self.domain.rho.is_range()
    }
}

/// `F(u; ρ) = ρ u (1 - u)`.
#[inline]
pub fn reaction(u: f64, rho: f64) -> f64 {
    rho * u * (1.0 - u)
}

/// `F'(u; ρ) = ρ (1 - 2u)`.
#[inline]
pub fn reaction_derivative(u: f64, rho: f64) -> f64 {
    rho * (1.0 - 2.0 * u)
}

/// `u_t - μ u_xx - ρ u (1 - u)` for a jet in physical coordinates.
#[inline]
pub fn residual(jet: &Jet<f64>, rho: f64, mu: f64) -> f64 {
    jet.dt - mu * jet.dxx - reaction(jet.v, rho)
}

/// Residual weight `1 / (λ |F(u; ρ)| + 1)`.
#[inline]
pub fn weight(u: f64, rho: f64, lambda: f64) -> f64 {
    1.0 / (lambda * reaction(u, rho).abs() + 1.0)
}

/// Spatial rate `√(ρ/6) / √μ` and temporal rate `5ρ/6` of the exponent.
fn wave_rates(rho: f64, mu: f64) -> (f64, f64) {
    ((rho / 6.0).sqrt() / mu.sqrt(), 5.0 * rho / 6.0)
}

/// Traveling-wave solution with speed `5√(ρ/6)`, with `x` measured in units
/// of `√μ`: `[1 + exp(√(ρ/6)·x/√μ − 5ρt/6)]⁻²`.
pub fn analytical(x: f64, t: f64, rho: f64, mu: f64) -> f64 {
    let (a, b) = wave_rates(rho, mu);
    let s = sigmoid(-(a * x - b * t));
    s * s
}

/// Closed-form jet of [`analytical`].
///
/// With `s = 1 / (1 + e^z)`, `z = a x − b t`:
/// `u = s²`, `u_x = −2a s²(1−s)`, `u_t = 2b s²(1−s)`,
/// `u_xx = −2a² s²(1−s)(3s−2)`. Written in `s` only, so it never overflows.
pub fn analytical_jet(x: f64, t: f64, rho: f64, mu: f64) -> Jet<f64> {
    let (a, b) = wave_rates(rho, mu);
    let s = sigmoid(-(a * x - b * t));
    let core = s * s * (1.0 - s);
    Jet::new(s * s, -2.0 * a * core, 2.0 * b * core, -2.0 * a * a * core * (3.0 * s - 2.0))
}

/// One collocation residual with its (frozen) weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    pub point: Point,
    pub u: f64,
    pub f: f64,
    pub omega: f64,
}

impl ResidualSample {
    pub fn new(point: Point, jet: &Jet<f64>, mu: f64, lambda: f64) -> Self {
        ResidualSample {
            point,
            u: jet.v,
            f: residual(jet, point.rho, mu),
            omega: weight(jet.v, point.rho, lambda),
        }
    }
}

/// Mean squared error between predictions and targets.
pub fn data_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(usage(format!(
            "prediction/target length mismatch: {} vs {}",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(usage("data loss over an empty batch"));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(sum / predictions.len() as f64)
}

/// `(1/N) Σ |ω f|²`. With every ω = 1 this is the plain residual loss.
pub fn physics_loss(samples: &[ResidualSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(usage("physics loss over an empty batch"));
    }
    let sum: f64 = samples.iter().map(|s| (s.omega * s.f).powi(2)).sum();
    Ok(sum / samples.len() as f64)
}

/// Plain sum; data-only models pass `None` for the physics term.
pub fn total_loss(data: f64, physics: Option<f64>) -> f64 {
    data + physics.unwrap_or(0.0)
}
