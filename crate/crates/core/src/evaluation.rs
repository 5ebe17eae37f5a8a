//! Error metrics against the analytical solution, ρ sweeps, residual profiles
//! and statistics across seeds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::Jet;
use crate::error::{usage, Result};
use crate::model::Network;
use crate::physics::{analytical, analytical_jet, reaction, residual, weight, FisherProblem};
use crate::sampling::{test_grid, Interval, Point, RhoSpec};

/// Anything that maps points to predicted `u` with derivatives.
pub trait Predictor: Sync {
    fn predict(&self, points: &[Point]) -> Vec<f64>;
    fn jet(&self, point: &Point) -> Jet<f64>;
    /// Whether ρ is an input.
    fn is_generalizing(&self) -> bool;
}

/// A network with its trained parameters.
#[derive(Clone, Copy, Debug)]
pub struct Trained<'a> {
    pub net: &'a Network,
    pub params: &'a [f64],
}

impl Predictor for Trained<'_> {
    fn predict(&self, points: &[Point]) -> Vec<f64> {
        self.net.predict(self.params, points)
    }

    fn jet(&self, point: &Point) -> Jet<f64> {
        self.net.eval(self.params, point)
    }

    fn is_generalizing(&self) -> bool {
        self.net.is_generalizing()
    }
}

/// The analytical solution posing as a network.
#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    pub mu: f64,
}

impl Predictor for Oracle {
    fn predict(&self, points: &[Point]) -> Vec<f64> {
        points.iter().map(|p| analytical(p.x, p.t, p.rho, self.mu)).collect()
    }

    fn jet(&self, p: &Point) -> Jet<f64> {
        analytical_jet(p.x, p.t, p.rho, self.mu)
    }

    fn is_generalizing(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nt: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 100, nt: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub l2: f64,
    pub grid: GridSpec,
    pub rho: f64,
    pub abs_errors: Option<Vec<f64>>,
}

/// Root-mean-square deviation from the analytical solution over `grid`.
pub fn l2_error(pred: &dyn Predictor, problem: &FisherProblem, grid: &[Point]) -> Result<f64> {
    if grid.is_empty() {
        return Err(usage("L2 error over an empty grid"));
    }
    let u = pred.predict(grid);
    let sum: f64 = grid
        .iter()
        .zip(&u)
        .map(|(p, u)| {
            let e = analytical(p.x, p.t, p.rho, problem.mu) - u;
            e * e
        })
        .sum();
    Ok((sum / grid.len() as f64).sqrt())
}

/// L2 error on the regular (x, t) grid at one ρ, optionally keeping the
/// pointwise errors.
pub fn evaluate_at(
    pred: &dyn Predictor,
    problem: &FisherProblem,
    rho: f64,
    spec: GridSpec,
    keep_errors: bool,
) -> Result<EvalReport> {
    let grid = test_grid(&problem.domain, spec.nx, spec.nt, &[rho])?;
    let l2 = l2_error(pred, problem, &grid)?;
    let abs_errors = keep_errors.then(|| {
        grid.iter()
            .zip(pred.predict(&grid))
            .map(|(p, u)| (analytical(p.x, p.t, p.rho, problem.mu) - u).abs())
            .collect()
    });
    Ok(EvalReport { l2, grid: spec, rho, abs_errors })
}

/// `n` log-spaced values from `lo` to `hi`, both included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    _ if i == n - 1 => hi,
                    _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// `count` equally spaced values strictly inside the range.
pub fn interior_rhos(range: Interval, count: usize) -> Vec<f64> {
    (1..=count).map(|i| range.lerp(i as f64 / (count + 1) as f64)).collect()
}

/// The default sweep: 50 log-spaced values over [10², 10⁵].
pub fn default_sweep() -> Vec<f64> {
    log_space(1e2, 1e5, 50)
}

/// Grid L2 error at each ρ.
pub fn rho_sweep(pred: &dyn Predictor, problem: &FisherProblem, rhos: &[f64], spec: GridSpec) -> Result<Vec<(f64, f64)>> {
    if !pred.is_generalizing() {
        return Err(usage("rho sweep needs a generalizing network"));
    }
    rhos.iter()
        .map(|&rho| Ok((rho, evaluate_at(pred, problem, rho, spec, false)?.l2)))
        .collect()
}

/// Mean grid L2 over `count` interior ρ values of `range`.
pub fn interior_mean_l2(
    pred: &dyn Predictor,
    problem: &FisherProblem,
    range: Interval,
    count: usize,
    spec: GridSpec,
) -> Result<f64> {
    if count == 0 {
        return Err(usage("interior evaluation needs at least one rho value"));
    }
    let sweep = rho_sweep(pred, problem, &interior_rhos(range, count), spec)?;
    Ok(sweep.iter().map(|(_, l2)| l2).sum::<f64>() / count as f64)
}

/// Number of interior ρ values in the continuous-range protocol.
pub const INTERIOR_RHO_COUNT: usize = 20;

/// The headline error of a trained network: grid L2 at the fixed ρ, or the
/// interior mean for a ρ range.
pub fn final_l2(net: &Network, params: &[f64], problem: &FisherProblem) -> Result<f64> {
    let pred = Trained { net, params };
    match problem.domain.rho {
        RhoSpec::Fixed(rho) => Ok(evaluate_at(&pred, problem, rho, GridSpec::default(), false)?.l2),
        RhoSpec::Range(r) => interior_mean_l2(&pred, problem, r, INTERIOR_RHO_COUNT, GridSpec::default()),
    }
}

/// λ values of the residual profile export.
pub const PROFILE_LAMBDAS: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub u_true: f64,
    pub u_pred: f64,
    pub f_raw: f64,
    /// `ω f` for each requested λ, in order.
    pub weighted: Vec<f64>,
}

/// Prediction, raw residual and weighted residuals along `xs` at time `t`.
pub fn wavefront_profile(
    pred: &dyn Predictor,
    problem: &FisherProblem,
    rho: f64,
    t: f64,
    xs: &[f64],
    lambdas: &[f64],
) -> Vec<ProfileRow> {
    xs.iter()
        .map(|&x| {
            let jet = pred.jet(&Point { x, t, rho });
            let f = residual(&jet, rho, problem.mu);
            ProfileRow {
                x,
                u_true: analytical(x, t, rho, problem.mu),
                u_pred: jet.v,
                f_raw: f,
                weighted: lambdas.iter().map(|&l| weight(jet.v, rho, l) * f).collect(),
            }
        })
        .collect()
}

/// Peak |ω f| where the front is (`0.05 < u < 0.95` in the analytical
/// solution) over the median |ω f| away from it.
pub fn peak_to_smooth_ratio(rows: &[ProfileRow], column: usize) -> Option<f64> {
    let mut peak = 0.0f64;
    let mut smooth = Vec::new();
    for r in rows {
        let v = r.weighted[column].abs();
        if r.u_true > 0.05 && r.u_true < 0.95 {
            peak = peak.max(v);
        } else {
            smooth.push(v);
        }
    }
    if smooth.is_empty() || peak == 0.0 {
        return None;
    }
    let m = median(&mut smooth);
    (m > 0.0).then(|| peak / m)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(v, 0.5)
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// `|F(u; ρ)|`, the quantity the residual weights shrink with.
pub fn reaction_magnitude(u: f64, rho: f64) -> f64 {
    reaction(u, rho).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn aggregate(values: &[f64]) -> Result<SeedStats> {
    if values.is_empty() {
        return Err(usage("cannot aggregate an empty list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SeedStats {
        n: values.len(),
        mean,
        std: var.sqrt(),
        median: quantile_sorted(&sorted, 0.5),
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
    })
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(usage(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Header of the residual profile table for the given λ values.
pub fn profile_header(lambdas: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["x", "u_true", "u_pred"].iter().map(|s| s.to_string()).collect();
    h.extend(lambdas.iter().map(|l| format!("f_lambda{l}")));
    h
}

pub fn profile_table(rows: &[ProfileRow], lambdas: &[f64]) -> Table {
    let mut t = Table::new(&profile_header(lambdas));
    for r in rows {
        let mut row = vec![r.x.to_string(), r.u_true.to_string(), r.u_pred.to_string()];
        row.extend(r.weighted.iter().map(f64::to_string));
        t.rows.push(row);
    }
    t
}
