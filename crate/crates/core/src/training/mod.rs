//! Full-batch Adam training with fresh samples every epoch.

mod adam;
pub mod objective;

pub use adam::{adam_step, LrSchedule, OptimizerState, StepOutcome};
pub use objective::{frozen_weights, total_loss_generic, LossBreakdown, Objective};

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::evaluation::final_l2;
use crate::model::{ModelKind, Network, NetworkConfig, ParameterVector};
use crate::physics::{analytical, FisherProblem};
use crate::sampling::{collocation, epoch_rng, sample_ann_data, sample_boundary, test_rng, Point, SampleBatch};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub epochs: u64,
    pub schedule: LrSchedule,
    /// Labeled points per epoch.
    pub n_data: usize,
    /// Collocation points per epoch.
    pub n_col: usize,
    /// Learning-curve sampling interval in epochs.
    pub stride: u64,
    /// Size of the fixed learning-curve test set.
    pub n_test: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// 50k epochs for a single ρ, 100k when generalizing; N = N_col = 1024.
    pub fn defaults(kind: ModelKind, generalizing: bool, seed: u64) -> Self {
        TrainConfig {
            kind,
            epochs: if generalizing { 100_000 } else { 50_000 },
            schedule: LrSchedule::default(),
            n_data: 1024,
            n_col: 1024,
            stride: 100,
            n_test: 1024,
            seed,
        }
    }

    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        if self.kind.architecture() != net.architecture {
            return Err(config(format!("model {} does not use a {:?} network", self.kind, net.architecture)));
        }
        if self.stride == 0 || self.n_test == 0 {
            return Err(config("stride and test-set size must be positive"));
        }
        let min_data = if self.kind.uses_physics() { 3 } else { 1 };
        if self.n_data < min_data {
            return Err(config(format!("{} needs at least {min_data} labeled points", self.kind)));
        }
        if self.kind.uses_physics() && self.n_col == 0 {
            return Err(config(format!("{} needs collocation points", self.kind)));
        }
        if !(self.schedule.lr0 > 0.0 && self.schedule.rate > 0.0 && self.schedule.steps > 0) {
            return Err(config("learning-rate schedule must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub epoch: u64,
    pub loss_total: f64,
    pub loss_data: f64,
    pub loss_physics: Option<f64>,
    pub test_mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub kind: ModelKind,
    pub seed: u64,
    pub rows: Vec<RecordRow>,
    pub params: ParameterVector,
    /// Epochs whose update was applied.
    pub epochs_completed: u64,
    pub final_l2: f64,
    /// First epoch with a non-finite loss or gradient.
    pub diverged_at: Option<u64>,
    pub wall_time_s: f64,
}

/// The JSON sidecar accompanying a learning-curve CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub seed: u64,
    pub final_l2: f64,
    pub epochs_completed: u64,
    pub diverged: bool,
    pub diverged_at: Option<u64>,
    pub wall_time_s: f64,
    pub config: serde_json::Value,
}

impl RunRecord {
    pub fn summary(&self, config: serde_json::Value) -> RunSummary {
        RunSummary {
            model: self.kind,
            seed: self.seed,
            final_l2: self.final_l2,
            epochs_completed: self.epochs_completed,
            diverged: self.diverged_at.is_some(),
            diverged_at: self.diverged_at,
            wall_time_s: self.wall_time_s,
            config,
        }
    }

    /// Learning curve; the physics column is omitted for data-only models.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let physics = self.kind.uses_physics();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["epoch", "loss_total", "loss_data"];
        if physics {
            header.push("loss_physics");
        }
        header.push("test_mse");
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.epoch.to_string(), r.loss_total.to_string(), r.loss_data.to_string()];
            if physics {
                rec.push(r.loss_physics.unwrap_or(f64::NAN).to_string());
            }
            rec.push(r.test_mse.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The labeled and collocation points of one epoch.
pub fn draw_batch(problem: &FisherProblem, cfg: &TrainConfig, epoch: u64) -> Result<SampleBatch> {
    let mut rng = epoch_rng(cfg.seed, epoch);
    if cfg.kind.uses_physics() {
        Ok(SampleBatch {
            labeled: sample_boundary(cfg.n_data, problem, &mut rng)?,
            collocation: collocation(cfg.n_col, &problem.domain, &mut rng),
        })
    } else {
        Ok(SampleBatch { labeled: sample_ann_data(cfg.n_data, problem, &mut rng)?, collocation: Vec::new() })
    }
}

struct TestSet {
    points: Vec<Point>,
    targets: Vec<f64>,
}

impl TestSet {
    fn new(problem: &FisherProblem, cfg: &TrainConfig) -> Self {
        let points = collocation(cfg.n_test, &problem.domain, &mut test_rng(cfg.seed));
        let targets = points.iter().map(|p| analytical(p.x, p.t, p.rho, problem.mu)).collect();
        TestSet { points, targets }
    }

    fn mse(&self, net: &Network, params: &[f64]) -> f64 {
        let u = net.predict(params, &self.points);
        u.iter().zip(&self.targets).map(|(u, y)| (u - y) * (u - y)).sum::<f64>() / u.len() as f64
    }
}

/// Trains one network from its seeded initialization.
///
/// A non-finite loss or gradient ends the run; the record keeps the last
/// finite parameters and the epoch at which it stopped.
pub fn train(problem: &FisherProblem, net_config: &NetworkConfig, cfg: &TrainConfig) -> Result<RunRecord> {
    let net = Network::new(*net_config, &problem.domain)?;
    train_from(problem, &net, cfg, net.init(cfg.seed))
}

/// As [`train`], from the given parameters instead of the seeded ones.
pub fn train_from(problem: &FisherProblem, net: &Network, cfg: &TrainConfig, mut params: ParameterVector) -> Result<RunRecord> {
    problem.validate()?;
    cfg.validate(&net.config)?;
    net.check_params(&params)?;
    let test = TestSet::new(problem, cfg);
    let mut state = OptimizerState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut objective = Objective::new();
    let mut rows = Vec::new();
    let mut diverged_at = None;
    let start = Instant::now();

    let mut epoch = 0;
    while epoch < cfg.epochs {
        let batch = draw_batch(problem, cfg, epoch)?;
        let loss = objective.loss_and_gradient(net, problem, cfg.kind, &params.values, &batch, &mut grad)?;
        if !loss.is_finite() {
            diverged_at = Some(epoch);
            break;
        }
        if epoch % cfg.stride == 0 || epoch + 1 == cfg.epochs {
            rows.push(RecordRow {
                epoch,
                loss_total: loss.total,
                loss_data: loss.data,
                loss_physics: loss.physics,
                test_mse: test.mse(net, &params.values),
            });
        }
        if adam_step(&mut params.values, &grad, &mut state, cfg.schedule.lr(epoch))? == StepOutcome::NonFinite {
            diverged_at = Some(epoch);
            break;
        }
        epoch += 1;
    }

    let final_l2 = final_l2(net, &params.values, problem)?;
    Ok(RunRecord {
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
        params,
        epochs_completed: epoch,
        final_l2,
        diverged_at,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Domain, Interval, RhoSpec};

    fn setup(kind: ModelKind, rho: RhoSpec, epochs: u64, seed: u64) -> (FisherProblem, NetworkConfig, TrainConfig) {
        let problem = FisherProblem::new(Domain::standard(rho), 10.0, 1.0).unwrap();
        let mut net = NetworkConfig::default_for(kind.architecture(), rho.is_range());
        net.neurons = 10;
        let mut cfg = TrainConfig::defaults(kind, rho.is_range(), seed);
        cfg.epochs = epochs;
        cfg.n_data = 64;
        cfg.n_col = 64;
        cfg.n_test = 64;
        cfg.stride = 3;
        (problem, net, cfg)
    }

    fn csv_of(r: &RunRecord) -> String {
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn defaults() {
        let d = TrainConfig::defaults(ModelKind::WavePinn, false, 0);
        assert_eq!((d.epochs, d.n_data, d.n_col, d.stride), (50_000, 1024, 1024, 100));
        assert_eq!(d.schedule.lr0, 0.001);
        assert_eq!(TrainConfig::defaults(ModelKind::WavePinn, true, 0).epochs, 100_000);
    }

    #[test]
    fn ten_epochs_are_deterministic() {
        for kind in ModelKind::ALL {
            let (p, n, c) = setup(kind, RhoSpec::Fixed(1e3), 10, 7);
            let a = train(&p, &n, &c).unwrap();
            let b = train(&p, &n, &c).unwrap();
            assert_eq!(csv_of(&a), csv_of(&b));
            assert_eq!(a.params, b.params);
            assert_eq!(a.final_l2.to_bits(), b.final_l2.to_bits());
            assert_eq!(a.epochs_completed, 10);
            assert!(a.diverged_at.is_none());
        }
    }

    #[test]
    fn records_are_strided_and_monotone() {
        let (p, n, c) = setup(ModelKind::StandardPinn, RhoSpec::Fixed(1e2), 10, 1);
        let r = train(&p, &n, &c).unwrap();
        let epochs: Vec<u64> = r.rows.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, [0, 3, 6, 9]);
        assert!(r.rows.iter().all(|r| r.loss_total.is_finite() && r.loss_physics.is_some()));
    }

    #[test]
    fn ann_records_have_no_physics_column() {
        let (p, n, c) = setup(ModelKind::WaveAnn, RhoSpec::Fixed(1e2), 4, 1);
        let r = train(&p, &n, &c).unwrap();
        assert!(r.rows.iter().all(|r| r.loss_physics.is_none() && r.loss_total == r.loss_data));
        assert!(csv_of(&r).starts_with("epoch,loss_total,loss_data,test_mse\n"));
        let (p, n, c) = setup(ModelKind::WavePinn, RhoSpec::Fixed(1e2), 4, 1);
        assert!(csv_of(&train(&p, &n, &c).unwrap()).starts_with("epoch,loss_total,loss_data,loss_physics,test_mse\n"));
    }

    #[test]
    fn seeds_differ() {
        let (p, n, c) = setup(ModelKind::WavePinn, RhoSpec::Fixed(1e3), 3, 1);
        let (_, _, c2) = setup(ModelKind::WavePinn, RhoSpec::Fixed(1e3), 3, 2);
        assert_ne!(train(&p, &n, &c).unwrap().params, train(&p, &n, &c2).unwrap().params);
    }

    #[test]
    fn divergence_is_recorded_not_raised() {
        let (p, n, c) = setup(ModelKind::StandardPinn, RhoSpec::Fixed(1e2), 50, 1);
        let net = Network::new(n, &p.domain).unwrap();
        let mut params = net.init(1);
        params.values[4] = f64::INFINITY;
        let r = train_from(&p, &net, &c, params).unwrap();
        assert_eq!(r.diverged_at, Some(0));
        assert_eq!(r.epochs_completed, 0);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn generalizing_runs_train() {
        let (p, n, c) = setup(ModelKind::WavePinn, RhoSpec::Range(Interval { lo: 100.0, hi: 1e4 }), 5, 3);
        let r = train(&p, &n, &c).unwrap();
        assert!(r.final_l2.is_finite() && r.final_l2 > 0.0);
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let (p, mut n, c) = setup(ModelKind::WavePinn, RhoSpec::Fixed(1e2), 1, 0);
        n.architecture = crate::model::Architecture::Standard;
        assert!(train(&p, &n, &c).is_err());
    }

    #[test]
    fn short_training_reduces_loss() {
        let (p, n, mut c) = setup(ModelKind::StandardAnn, RhoSpec::Fixed(1e2), 300, 5);
        c.stride = 299;
        let r = train(&p, &n, &c).unwrap();
        assert!(r.rows.last().unwrap().loss_total < 0.5 * r.rows[0].loss_total);
    }
}
