//! Finite-difference oracles.
//!
//! Central differences at a base step `h`, refined by Richardson
//! extrapolation over `h, h/2, h/4, …` and evaluated in double-double, so the
//! result is limited neither by cancellation nor by the step being coarse
//! relative to the function's local scale (wave-layer inputs multiply `t` by
//! ρ up to 10⁴).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Extended, Scalar};
use crate::error::Result;
use crate::model::{ModelKind, Network, NetworkConfig};
use crate::physics::{FisherProblem, DEFAULT_MU};
use crate::sampling::{epoch_rng, Domain, Interval, RhoSpec};
use crate::training::{draw_batch, frozen_weights, total_loss_generic, Objective, TrainConfig};

const MAX_LEVELS: usize = 10;
/// Default relative agreement of successive extrapolants.
pub const CONVERGED: f64 = 1e-13;

/// Richardson-refined central estimate of `f'(x)`.
pub fn central_difference(f: impl Fn(Extended) -> Extended, x: f64, h: f64) -> f64 {
    central_difference_mut(f, x, h, CONVERGED)
}

/// As [`central_difference`], for closures that reuse a buffer, stopping
/// once successive extrapolants agree to `tol` relative.
pub fn central_difference_mut(mut f: impl FnMut(Extended) -> Extended, x: f64, h: f64, tol: f64) -> f64 {
    let xe = Extended::from(x);
    richardson(h, tol, |step| {
        let s = Extended::from(step);
        (f(xe + s) - f(xe - s)) / (Extended::from(2.0) * s)
    })
}

/// Richardson-refined central estimate of `f''(x)`.
pub fn second_difference(f: impl Fn(Extended) -> Extended, x: f64, h: f64) -> f64 {
    let xe = Extended::from(x);
    let mid = f(xe);
    richardson(h, CONVERGED, |step| {
        let s = Extended::from(step);
        (f(xe + s) - Extended::from(2.0) * mid + f(xe - s)) / (s * s)
    })
}

/// Neville table on `D(h) = D + c₁h² + c₂h⁴ + …` with halving steps.
fn richardson(h: f64, tol: f64, mut d: impl FnMut(f64) -> Extended) -> f64 {
    let mut prev: Vec<Extended> = vec![d(h)];
    let mut best = prev[0].value();
    let mut best_err = f64::INFINITY;
    for level in 1..MAX_LEVELS {
        let step = h / f64::powi(2.0, level as i32);
        let mut row = Vec::with_capacity(level + 1);
        row.push(d(step));
        let mut factor = Extended::from(1.0);
        for j in 1..=level {
            factor = factor * Extended::from(4.0);
            let r = row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - Extended::from(1.0));
            row.push(r);
        }
        let est = row[level].value();
        let err = (est - prev[level - 1].value()).abs();
        if err < best_err {
            best_err = err;
            best = est;
        }
        if err <= tol * est.abs().max(1e-300) {
            return est;
        }
        prev = row;
    }
    best
}

/// `|a − b| / max(|a|, |b|)`; 0 when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error between an analytic gradient and a
/// finite-difference one, over components whose magnitude exceeds `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) > floor)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}


/// One configuration of the gradient check suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub kind: ModelKind,
    pub lambda: f64,
    pub generalizing: bool,
    pub draw: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub case: GradCheckCase,
    pub max_rel_error: f64,
    /// Components above the magnitude floor.
    pub checked: usize,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub lambdas: Vec<f64>,
    pub draws: u64,
    pub seed: u64,
    pub rho: f64,
    pub rho_range: Interval,
    pub n_data: usize,
    pub n_col: usize,
    /// Base finite-difference step.
    pub step: f64,
    /// Components with smaller magnitude are not compared.
    pub floor: f64,
    pub tolerance: f64,
    /// Test hook: perturbs the analytic gradient so the check must fail.
    pub corrupt: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            lambdas: vec![0.0, 1.0],
            draws: 5,
            seed: 0,
            rho: 1e3,
            rho_range: Interval { lo: 1e2, hi: 1e4 },
            n_data: 3,
            n_col: 2,
            step: 1e-5,
            floor: 1e-8,
            tolerance: 1e-5,
            corrupt: false,
        }
    }
}

impl GradCheckConfig {
    pub fn cases(&self) -> Vec<GradCheckCase> {
        let mut out = Vec::new();
        for kind in ModelKind::ALL {
            for &lambda in &self.lambdas {
                for generalizing in [false, true] {
                    for draw in 0..self.draws {
                        out.push(GradCheckCase { kind, lambda, generalizing, draw });
                    }
                }
            }
        }
        out
    }

    fn problem(&self, case: &GradCheckCase) -> Result<FisherProblem> {
        let rho = if case.generalizing { RhoSpec::Range(self.rho_range) } else { RhoSpec::Fixed(self.rho) };
        FisherProblem::new(Domain::standard(rho), DEFAULT_MU, case.lambda)
    }
}

/// Batched analytic gradient of the total loss against finite differences
/// of the same loss, at a randomly perturbed initialization and a fresh
/// sample. Residual weights are frozen at the base point in both.
pub fn check_case(cfg: &GradCheckConfig, case: &GradCheckCase) -> Result<GradCheckResult> {
    let problem = cfg.problem(case)?;
    let net_cfg = NetworkConfig::default_for(case.kind.architecture(), case.generalizing);
    let net = Network::new(net_cfg, &problem.domain)?;
    let seed = cfg.seed.wrapping_mul(1000).wrapping_add(case.draw);
    let mut params = net.init(seed).values;
    let mut rng = epoch_rng(seed, u64::MAX - 16);
    for p in &mut params {
        *p += rng.gen_range(-0.1..0.1);
    }
    let mut train_cfg = TrainConfig::defaults(case.kind, case.generalizing, seed);
    train_cfg.n_data = cfg.n_data;
    train_cfg.n_col = cfg.n_col;
    let batch = draw_batch(&problem, &train_cfg, 0)?;

    let mut grad = vec![0.0; params.len()];
    Objective::new().loss_and_gradient(&net, &problem, case.kind, &params, &batch, &mut grad)?;
    if cfg.corrupt {
        if let Some(g) = grad.iter_mut().find(|g| g.abs() > cfg.floor) {
            *g *= 1.0 + 1e-3;
        }
    }

    let weights = frozen_weights(&net, &problem, &params, &batch);
    let base: Vec<Extended> = params.iter().map(|&p| Extended::from(p)).collect();
    let mut numeric = vec![0.0; params.len()];
    for (k, n) in numeric.iter_mut().enumerate() {
        let mut work = base.clone();
        let f = |v: Extended| {
            work[k] = v;
            total_loss_generic(&net, &problem, case.kind, &work, &batch, &weights)
                .expect("batch validated by the analytic pass")
        };
        *n = central_difference_mut(f, params[k], cfg.step, cfg.tolerance * 1e-4);
    }
    let checked = grad
        .iter()
        .zip(&numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) > cfg.floor)
        .count();
    Ok(GradCheckResult {
        case: *case,
        max_rel_error: max_relative_error(&grad, &numeric, cfg.floor),
        checked,
        params: params.len(),
    })
}

pub fn run_suite(cfg: &GradCheckConfig) -> Result<Vec<GradCheckResult>> {
    cfg.cases().iter().map(|c| check_case(cfg, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_derivatives_of_steep_functions() {
        // tanh(k x) with k = 5000 at a step of 1e-5: k h = 0.05.
        let k = 5000.0;
        let f = |x: Extended| (Extended::from(k) * x).tanh();
        let x = 1e-4;
        let y = (k * x).tanh();
        let d1 = k * (1.0 - y * y);
        let d2 = -2.0 * k * k * y * (1.0 - y * y);
        assert!(relative_error(central_difference(f, x, 1e-5), d1) < 1e-10);
        assert!(relative_error(second_difference(f, x, 1e-5), d2) < 1e-9);
    }

    #[test]
    fn polynomial_is_exact() {
        let f = |x: Extended| x * x * x;
        assert!((central_difference(f, 2.0, 1e-5) - 12.0).abs() < 1e-12);
        assert!((second_difference(f, 2.0, 1e-5) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn error_metric() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(max_relative_error(&[1.0, 1e-12], &[1.0, 0.0], 1e-8), 0.0);
        assert!((max_relative_error(&[2.0], &[1.0], 1e-8) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn suite_cases_cover_every_variant() {
        let cfg = GradCheckConfig::default();
        assert_eq!(cfg.cases().len(), 4 * 2 * 2 * 5);
    }

    #[test]
    fn single_case_passes_and_corruption_fails() {
        let mut cfg = GradCheckConfig::default();
        let case = GradCheckCase { kind: ModelKind::WavePinn, lambda: 1.0, generalizing: false, draw: 0 };
        let r = check_case(&cfg, &case).unwrap();
        assert!(r.max_rel_error <= 1e-5, "{r:?}");
        assert!(r.checked > r.params / 2);
        cfg.corrupt = true;
        assert!(check_case(&cfg, &case).unwrap().max_rel_error > 1e-5);
    }
}
