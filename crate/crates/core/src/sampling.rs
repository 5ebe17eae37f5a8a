//! Training and test point generation.
//!
//! Every batch is drawn from a ChaCha stream keyed by `(seed, stream)`, so a
//! run is reproducible from its seed alone and each epoch gets an independent
//! stream regardless of how many numbers earlier epochs consumed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::physics::{analytical, FisherProblem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(config(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Maps `u ∈ [0, 1]` affinely onto the interval.
    pub fn lerp(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Reaction rate: one value (discrete) or a range (generalizing networks).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSpec {
    Fixed(f64),
    Range(Interval),
}

impl RhoSpec {
    pub fn is_range(&self) -> bool {
        matches!(self, RhoSpec::Range(_))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RhoSpec::Fixed(r) if !(r > 0.0 && r.is_finite()) => Err(config(format!("rho must be positive, got {r}"))),
            RhoSpec::Range(i) if !(i.lo > 0.0) => Err(config(format!("rho range must be positive, got [{}, {}]", i.lo, i.hi))),
            RhoSpec::Range(i) => Interval::new(i.lo, i.hi).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// The representative value used where a single ρ is needed.
    pub fn nominal(&self) -> f64 {
        match *self {
            RhoSpec::Fixed(r) => r,
            RhoSpec::Range(i) => i.hi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x: Interval,
    pub t: Interval,
    pub rho: RhoSpec,
}

impl Domain {
    /// x ∈ [-5, 5], t ∈ [0, 0.004].
    pub fn standard(rho: RhoSpec) -> Self {
        Domain {
            x: Interval { lo: -5.0, hi: 5.0 },
            t: Interval { lo: 0.0, hi: 0.004 },
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Interval::new(self.x.lo, self.x.hi)?;
        Interval::new(self.t.lo, self.t.hi)?;
        self.rho.validate()
    }
}

/// A space-time point with its reaction rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub point: Point,
    pub target: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleBatch {
    pub labeled: Vec<LabeledPoint>,
    pub collocation: Vec<Point>,
}

const STREAM_INIT: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_EPOCH: u64 = 16;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, STREAM_INIT)
}

/// Generator for the fixed learning-curve test set.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, STREAM_TEST)
}

/// Independent generator for one training epoch.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    stream(seed, STREAM_EPOCH + epoch)
}

/// Latin hypercube sample of `n` points in the box `bounds`.
///
/// Each dimension is cut into `n` equal strata; every stratum receives exactly
/// one point, placed uniformly inside it, and strata are paired across
/// dimensions by independent random permutations.
pub fn lhs<const K: usize, R: Rng + ?Sized>(n: usize, bounds: &[Interval; K], rng: &mut R) -> Vec<[f64; K]> {
    let mut points = vec![[0.0; K]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (k, b) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        for (p, &j) in points.iter_mut().zip(&strata) {
            let u = (j as f64 + rng.gen::<f64>()) / n as f64;
            p[k] = b.lerp(u);
        }
    }
    points
}

/// Collocation points: 2-D LHS over (x, t), or 3-D with ρ uniform over its
/// range for generalizing problems.
pub fn collocation<R: Rng + ?Sized>(n: usize, domain: &Domain, rng: &mut R) -> Vec<Point> {
    match domain.rho {
        RhoSpec::Fixed(rho) => lhs(n, &[domain.x, domain.t], rng)
            .into_iter()
            .map(|[x, t]| Point { x, t, rho })
            .collect(),
        RhoSpec::Range(r) => lhs(n, &[domain.x, domain.t, r], rng)
            .into_iter()
            .map(|[x, t, rho]| Point { x, t, rho })
            .collect(),
    }
}

fn pick_rho<R: Rng + ?Sized>(spec: &RhoSpec, rng: &mut R) -> f64 {
    match *spec {
        RhoSpec::Fixed(r) => r,
        RhoSpec::Range(i) => {
            if rng.gen::<bool>() {
                i.lo
            } else {
                i.hi
            }
        }
    }
}

fn label(problem: &FisherProblem, point: Point) -> LabeledPoint {
    LabeledPoint { point, target: analytical(point.x, point.t, point.rho, problem.mu) }
}

/// Labeled initial/boundary data.
///
/// Each point picks one of the three boundary segments uniformly: the initial
/// line `t = t_min`, or one of the two spatial walls with `t` uniform. For a ρ
/// range, ρ is one of the two endpoints with equal probability.
pub fn sample_boundary<R: Rng + ?Sized>(n: usize, problem: &FisherProblem, rng: &mut R) -> Result<Vec<LabeledPoint>> {
    if n < 3 {
        return Err(usage(format!("boundary sample needs at least 3 points, got {n}")));
    }
    let d = &problem.domain;
    Ok((0..n)
        .map(|_| {
            let point = match rng.gen_range(0..3u8) {
                0 => Point { x: d.x.lerp(rng.gen()), t: d.t.lo, rho: 0.0 },
                1 => Point { x: d.x.lo, t: d.t.lerp(rng.gen()), rho: 0.0 },
                _ => Point { x: d.x.hi, t: d.t.lerp(rng.gen()), rho: 0.0 },
            };
            let rho = pick_rho(&d.rho, rng);
            label(problem, Point { rho, ..point })
        })
        .collect())
}

/// Labeled interior data for the purely data-driven models: 2-D LHS over
/// (x, t), with ρ drawn from the two range endpoints when generalizing.
pub fn sample_ann_data<R: Rng + ?Sized>(n: usize, problem: &FisherProblem, rng: &mut R) -> Result<Vec<LabeledPoint>> {
    if n == 0 {
        return Err(usage("ANN data sample needs at least one point"));
    }
    let d = &problem.domain;
    let xt = lhs(n, &[d.x, d.t], rng);
    Ok(xt
        .into_iter()
        .map(|[x, t]| {
            let rho = pick_rho(&d.rho, rng);
            label(problem, Point { x, t, rho })
        })
        .collect())
}

/// Inclusive uniform grid over (x, t), crossed with each ρ in `rhos`.
pub fn test_grid(domain: &Domain, nx: usize, nt: usize, rhos: &[f64]) -> Result<Vec<Point>> {
    if nx < 2 || nt < 2 {
        return Err(usage(format!("test grid needs at least 2x2 nodes, got {nx}x{nt}")));
    }
    if rhos.is_empty() {
        return Err(usage("test grid needs at least one rho value"));
    }
    let mut pts = Vec::with_capacity(nx * nt * rhos.len());
    for &rho in rhos {
        for i in 0..nx {
            let x = domain.x.lerp(i as f64 / (nx - 1) as f64);
            for j in 0..nt {
                let t = domain.t.lerp(j as f64 / (nt - 1) as f64);
                pts.push(Point { x, t, rho });
            }
        }
    }
    Ok(pts)
}
