//! Fixtures shared by the benchmarks.

use fisher_core::model::ModelKind;
use fisher_core::sampling::SampleBatch;
use fisher_core::training::{draw_batch, TrainConfig};
use fisher_core::{Domain, FisherProblem, Interval, Network, NetworkConfig, ParameterVector, RhoSpec};

pub struct Fixture {
    pub kind: ModelKind,
    pub problem: FisherProblem,
    pub net: Network,
    pub params: ParameterVector,
    pub batch: SampleBatch,
}

/// A default-sized network at its initialization and the epoch-0 batch of
/// `n` labeled and `n` collocation points.
pub fn fixture(kind: ModelKind, generalizing: bool, n: usize) -> Fixture {
    let rho = if generalizing { RhoSpec::Range(Interval { lo: 1e2, hi: 1e4 }) } else { RhoSpec::Fixed(1e3) };
    let problem = FisherProblem::new(Domain::standard(rho), 10.0, 1.0).expect("valid problem");
    let net = Network::new(NetworkConfig::default_for(kind.architecture(), generalizing), &problem.domain)
        .expect("valid network");
    let params = net.init(0);
    let mut cfg = TrainConfig::defaults(kind, generalizing, 0);
    cfg.n_data = n;
    cfg.n_col = n;
    let batch = draw_batch(&problem, &cfg, 0).expect("valid batch");
    Fixture { kind, problem, net, params, batch }
}
