//! Experiment configuration files.

use std::path::{Path, PathBuf};

use fisher_core::evaluation::INTERIOR_RHO_COUNT;
use fisher_core::training::LrSchedule;
use fisher_core::{Activation, Domain, FisherProblem, Interval, ModelKind, NetworkConfig, RhoSpec, TrainConfig, DEFAULT_MU};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One table cell or sweep. Every omitted field takes its default; fields
/// left as `null` are filled from the model kind when resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub lambda: f64,
    pub mu: f64,
    /// Single reaction rate; ignored when `rho_range` is set.
    pub rho: f64,
    /// `[ρ_min, ρ_max]` for a generalizing network.
    pub rho_range: Option<[f64; 2]>,
    pub x_range: [f64; 2],
    pub t_range: [f64; 2],
    pub hidden_layers: Option<usize>,
    pub neurons: usize,
    pub activation: Activation,
    pub epochs: Option<u64>,
    pub lr0: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub n_data: usize,
    pub n_col: usize,
    pub stride: u64,
    pub n_test: usize,
    /// Interior ρ values averaged for the error of a generalizing run.
    pub interior_rho_count: usize,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = LrSchedule::default();
        ExperimentConfig {
            model: ModelKind::WavePinn,
            lambda: 1.0,
            mu: DEFAULT_MU,
            rho: 1e3,
            rho_range: None,
            x_range: [-5.0, 5.0],
            t_range: [0.0, 0.004],
            hidden_layers: None,
            neurons: 20,
            activation: Activation::Tanh,
            epochs: None,
            lr0: s.lr0,
            decay_rate: s.rate,
            decay_steps: s.steps,
            n_data: 1024,
            n_col: 1024,
            stride: 100,
            n_test: 1024,
            interior_rho_count: INTERIOR_RHO_COUNT,
            seeds: vec![0],
            out: None,
        }
    }
}

/// The core objects a configuration describes, for one seed.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub problem: FisherProblem,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn generalizing(&self) -> bool {
        self.rho_range.is_some()
    }

    /// Copy with every `null` default made explicit.
    pub fn filled(&self) -> Self {
        let g = self.generalizing();
        let mut c = self.clone();
        c.hidden_layers.get_or_insert(NetworkConfig::default_for(self.model.architecture(), g).hidden_layers);
        let defaults = TrainConfig::defaults(self.model, g, 0);
        c.epochs.get_or_insert(defaults.epochs);
        if !self.model.uses_physics() {
            c.lambda = 0.0;
        }
        c
    }

    pub fn resolve(&self, seed: u64) -> Result<Resolved, CliError> {
        let c = self.filled();
        let interval = |r: [f64; 2], what: &str| {
            Interval::new(r[0], r[1]).map_err(|_| CliError::Usage(format!("degenerate {what} range [{}, {}]", r[0], r[1])))
        };
        let rho = match c.rho_range {
            Some(r) => RhoSpec::Range(interval(r, "rho")?),
            None => RhoSpec::Fixed(c.rho),
        };
        let domain = Domain { x: interval(c.x_range, "x")?, t: interval(c.t_range, "t")?, rho };
        if let RhoSpec::Fixed(r) = rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::Usage(format!("rho must be positive, got {r}")));
            }
        }
        let problem = FisherProblem::new(domain, c.mu, c.lambda)?;
        let network = NetworkConfig {
            architecture: c.model.architecture(),
            generalizing: c.generalizing(),
            hidden_layers: c.hidden_layers.unwrap_or_default(),
            neurons: c.neurons,
            activation: c.activation,
        };
        network.validate()?;
        let train = TrainConfig {
            kind: c.model,
            epochs: c.epochs.unwrap_or_default(),
            schedule: LrSchedule { lr0: c.lr0, rate: c.decay_rate, steps: c.decay_steps },
            n_data: c.n_data,
            n_col: c.n_col,
            stride: c.stride,
            n_test: c.n_test,
            seed,
        };
        train.validate(&network)?;
        if c.interior_rho_count == 0 {
            return Err(CliError::Usage("interior_rho_count must be positive".into()));
        }
        Ok(Resolved { problem, network, train })
    }

    /// Checks every seed resolves.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Usage("config lists no seeds".into()));
        }
        self.resolve(self.seeds[0]).map(|_| ())
    }

    /// The filled configuration reduced to one seed, without the output
    /// directory. Its hash names the run.
    pub fn run_config(&self, seed: u64) -> Self {
        let mut c = self.filled();
        c.seeds = vec![seed];
        c.out = None;
        c
    }

    pub fn run_id(&self, seed: u64) -> String {
        hash_json(&serde_json::to_value(self.run_config(seed)).expect("config serializes"))
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON text.
pub fn hash_json(v: &serde_json::Value) -> String {
    let digest = Sha256::digest(v.to_string().as_bytes());
    format!("{digest:x}")[..16].to_string()
}
