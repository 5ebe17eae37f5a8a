//! Network variants: standard or wave architecture, each for a single ρ or
//! generalizing over a ρ range, with a sigmoid output so `u ∈ (0, 1)`.

pub mod batch;
mod checkpoint;
mod forward;
mod params;
mod scaling;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use params::{DenseLayout, Layout, ParamIndex, ParameterVector};
pub use scaling::{FeatureScaler, RhoFeature, ScaledPoint};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Elementary, Jet, Scalar};
use crate::error::{config, usage, Error, Result};
use crate::sampling::{Domain, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Standard,
    /// Inputs are compressed to `z = θ₁x + θ₂t + θ₃` before the hidden layers.
    Wave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Swish,
    Sigmoid,
    Sine,
}

impl Activation {
    pub fn elementary(self) -> Elementary {
        match self {
            Activation::Tanh => Elementary::Tanh,
            Activation::Swish => Elementary::Swish,
            Activation::Sigmoid => Elementary::Sigmoid,
            Activation::Sine => Elementary::Sin,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "swish" => Ok(Activation::Swish),
            "sigmoid" => Ok(Activation::Sigmoid),
            "sine" | "sin" => Ok(Activation::Sine),
            _ => Err(config(format!("unknown activation `{s}`"))),
        }
    }
}

/// The four models compared in the study: with or without the physics loss,
/// with or without the wave layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    StandardAnn,
    WaveAnn,
    StandardPinn,
    WavePinn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::StandardAnn,
        ModelKind::WaveAnn,
        ModelKind::StandardPinn,
        ModelKind::WavePinn,
    ];

    pub fn uses_physics(self) -> bool {
        matches!(self, ModelKind::StandardPinn | ModelKind::WavePinn)
    }

    pub fn architecture(self) -> Architecture {
        match self {
            ModelKind::StandardAnn | ModelKind::StandardPinn => Architecture::Standard,
            ModelKind::WaveAnn | ModelKind::WavePinn => Architecture::Wave,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::StandardAnn => "standard-ann",
            ModelKind::WaveAnn => "wave-ann",
            ModelKind::StandardPinn => "standard-pinn",
            ModelKind::WavePinn => "wave-pinn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    pub generalizing: bool,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
}

impl NetworkConfig {
    /// 2×20 tanh for a single ρ, 3×20 tanh when generalizing.
    pub fn default_for(architecture: Architecture, generalizing: bool) -> Self {
        NetworkConfig {
            architecture,
            generalizing,
            hidden_layers: if generalizing { 3 } else { 2 },
            neurons: 20,
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.neurons == 0 {
            return Err(config(format!(
                "network needs at least one hidden layer and neuron, got {}x{}",
                self.hidden_layers, self.neurons
            )));
        }
        Ok(())
    }
}

/// A network shape bound to its input scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub scaler: FeatureScaler,
    pub layout: Layout,
}

impl Network {
    pub fn new(config: NetworkConfig, domain: &Domain) -> Result<Self> {
        config.validate()?;
        domain.validate()?;
        if config.generalizing != domain.rho.is_range() {
            return Err(config_mismatch(config.generalizing));
        }
        let scaler = FeatureScaler::new(config.architecture, domain)?;
        let layout = Layout::new(&config);
        Ok(Network { config, scaler, layout })
    }

    pub fn param_count(&self) -> usize {
        self.layout.len()
    }

    pub fn is_generalizing(&self) -> bool {
        self.config.generalizing
    }

    /// Activation of dense layer `l`: the configured hidden activation, or
    /// the sigmoid for the output layer.
    pub fn layer_activation(&self, l: usize) -> Elementary {
        if l + 1 == self.layout.layers.len() {
            Elementary::Sigmoid
        } else {
            self.config.activation.elementary()
        }
    }

    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(&self, seed: u64) -> ParameterVector {
        ParameterVector::glorot(&self.layout, &mut crate::sampling::init_rng(seed))
    }

    fn point(&self, x: f64, t: f64, rho: Option<f64>) -> Result<Point> {
        match (self.config.generalizing, rho) {
            (true, Some(rho)) => Ok(Point { x, t, rho }),
            (false, None) => Ok(Point { x, t, rho: f64::NAN }),
            (true, None) => Err(usage("generalizing network needs a rho input")),
            (false, Some(_)) => Err(usage("rho supplied to a single-rho network")),
        }
    }

    /// Network output at one point.
    pub fn forward(&self, params: &ParameterVector, x: f64, t: f64, rho: Option<f64>) -> Result<f64> {
        Ok(self.forward_jet(params, x, t, rho)?.v)
    }

    /// Network output with its physical-coordinate derivatives.
    pub fn forward_jet(&self, params: &ParameterVector, x: f64, t: f64, rho: Option<f64>) -> Result<Jet<f64>> {
        self.check_params(params)?;
        let p = self.point(x, t, rho)?;
        Ok(self.eval(&params.values, &p))
    }

    pub(crate) fn check_params(&self, params: &ParameterVector) -> Result<()> {
        if params.layout != self.layout {
            return Err(usage("parameter vector layout does not match the network"));
        }
        Ok(())
    }

    /// Generic single-point evaluation. `point.rho` is ignored unless the
    /// network is generalizing.
    pub fn eval<S: Scalar>(&self, params: &[S], point: &Point) -> Jet<S> {
        forward::eval(self, params, S::constant(point.x), S::constant(point.t), point.rho)
    }

    /// Output value of [`Network::eval`] without the derivative components.
    pub fn eval_value<S: Scalar>(&self, params: &[S], point: &Point) -> S {
        forward::eval_value(self, params, point)
    }

    /// As [`Network::eval`], with the space-time coordinates in `S`.
    pub fn eval_at<S: Scalar>(&self, params: &[S], x: S, t: S, rho: f64) -> Jet<S> {
        forward::eval(self, params, x, t, rho)
    }
}

fn config_mismatch(generalizing: bool) -> Error {
    if generalizing {
        config("generalizing network requires a rho range")
    } else {
        config("single-rho network requires a fixed rho")
    }
}
