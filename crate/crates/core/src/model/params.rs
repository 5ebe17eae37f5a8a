use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, NetworkConfig};

/// One dense layer inside the flat parameter vector: a row-major
/// `fan_out × fan_in` weight block at `offset`, followed by `fan_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl DenseLayout {
    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

/// Where each trainable parameter lives in the flat vector. The wave layer,
/// when present, occupies indices 0..3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    /// Number of wave-layer inputs (2 or 3), or 0 without a wave layer.
    pub wave_inputs: usize,
    pub layers: Vec<DenseLayout>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamIndex {
    /// θ₁, θ₂, θ₃ of the wave layer.
    Wave(usize),
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
}

impl Layout {
    pub fn new(config: &NetworkConfig) -> Self {
        let raw_inputs = if config.generalizing { 3 } else { 2 };
        let (wave_inputs, first_fan_in) = match config.architecture {
            Architecture::Wave => (raw_inputs, 1),
            Architecture::Standard => (0, raw_inputs),
        };
        let mut offset = if wave_inputs > 0 { 3 } else { 0 };
        let mut fan_in = first_fan_in;
        let mut layers = Vec::with_capacity(config.hidden_layers + 1);
        for l in 0..=config.hidden_layers {
            let fan_out = if l == config.hidden_layers { 1 } else { config.neurons };
            let layer = DenseLayout { fan_in, fan_out, offset };
            offset += layer.len();
            layers.push(layer);
            fan_in = fan_out;
        }
        Layout { wave_inputs, layers }
    }

    pub fn has_wave(&self) -> bool {
        self.wave_inputs > 0
    }

    pub fn len(&self) -> usize {
        let wave = if self.has_wave() { 3 } else { 0 };
        wave + self.layers.iter().map(DenseLayout::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, p: ParamIndex) -> Option<usize> {
        match p {
            ParamIndex::Wave(k) if self.has_wave() && k < 3 => Some(k),
            ParamIndex::Wave(_) => None,
            ParamIndex::Weight { layer, row, col } => {
                let l = self.layers.get(layer)?;
                (row < l.fan_out && col < l.fan_in).then(|| l.offset + row * l.fan_in + col)
            }
            ParamIndex::Bias { layer, row } => {
                let l = self.layers.get(layer)?;
                (row < l.fan_out).then(|| l.biases().start + row)
            }
        }
    }

    pub fn locate(&self, index: usize) -> Option<ParamIndex> {
        if self.has_wave() && index < 3 {
            return Some(ParamIndex::Wave(index));
        }
        for (layer, l) in self.layers.iter().enumerate() {
            if l.weights().contains(&index) {
                let k = index - l.offset;
                return Some(ParamIndex::Weight { layer, row: k / l.fan_in, col: k % l.fan_in });
            }
            if l.biases().contains(&index) {
                return Some(ParamIndex::Bias { layer, row: index - l.biases().start });
            }
        }
        None
    }
}

/// All weights and biases of a network as one flat vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParameterVector {
    pub fn zeros(layout: &Layout) -> Self {
        ParameterVector { values: vec![0.0; layout.len()], layout: layout.clone() }
    }

    /// Dense weights ~ U(−b, b) with `b = √(6 / (fan_in + fan_out))`, biases
    /// zero. Wave-layer θ₁, θ₂ use the wave-layer input count as fan-in and a
    /// fan-out of one; θ₃ starts at zero.
    pub fn glorot<R: Rng + ?Sized>(layout: &Layout, rng: &mut R) -> Self {
        let mut p = Self::zeros(layout);
        if layout.has_wave() {
            let b = glorot_bound(layout.wave_inputs, 1);
            p.values[0] = rng.gen_range(-b..=b);
            p.values[1] = rng.gen_range(-b..=b);
        }
        for l in &layout.layers {
            let b = glorot_bound(l.fan_in, l.fan_out);
            for w in &mut p.values[l.weights()] {
                *w = rng.gen_range(-b..=b);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, p: ParamIndex) -> Option<f64> {
        self.layout.index(p).map(|i| self.values[i])
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;
    use crate::sampling::init_rng;
    use proptest::prelude::*;

    fn cfg(arch: Architecture, generalizing: bool, hidden: usize, neurons: usize) -> NetworkConfig {
        NetworkConfig { architecture: arch, generalizing, hidden_layers: hidden, neurons, activation: Activation::Tanh }
    }

    #[test]
    fn same_seed_same_parameters() {
        let layout = Layout::new(&cfg(Architecture::Wave, true, 3, 20));
        let a = ParameterVector::glorot(&layout, &mut init_rng(7));
        let b = ParameterVector::glorot(&layout, &mut init_rng(7));
        assert_eq!(a, b);
        assert_ne!(a, ParameterVector::glorot(&layout, &mut init_rng(8)));
    }

    #[test]
    fn first_layer_weights_respect_glorot_bound() {
        let layout = Layout::new(&cfg(Architecture::Standard, false, 2, 20));
        let p = ParameterVector::glorot(&layout, &mut init_rng(1));
        let b = (6.0f64 / 22.0).sqrt();
        assert!((b - 0.522).abs() < 1e-3);
        let first = layout.layers[0];
        assert!(p.values[first.weights()].iter().all(|w| w.abs() <= b));
        assert!(p.values[first.biases()].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn wave_layer_initialization() {
        let layout = Layout::new(&cfg(Architecture::Wave, false, 2, 20));
        let p = ParameterVector::glorot(&layout, &mut init_rng(3));
        let b = glorot_bound(2, 1);
        assert!(p.values[0].abs() <= b && p.values[1].abs() <= b);
        assert_eq!(p.values[2], 0.0);
        assert_eq!(layout.layers[0].fan_in, 1);
    }

    proptest! {
        #[test]
        fn layout_is_a_bijection(
            wave in any::<bool>(),
            generalizing in any::<bool>(),
            hidden in 1usize..4,
            neurons in 1usize..12,
        ) {
            let arch = if wave { Architecture::Wave } else { Architecture::Standard };
            let layout = Layout::new(&cfg(arch, generalizing, hidden, neurons));
            let inputs = if generalizing { 3 } else { 2 };
            let mut expected = if wave { 3 } else { 0 };
            let mut fan_in = if wave { 1 } else { inputs };
            for l in 0..=hidden {
                let fan_out = if l == hidden { 1 } else { neurons };
                expected += (fan_in + 1) * fan_out;
                fan_in = fan_out;
            }
            prop_assert_eq!(layout.len(), expected);
            for i in 0..layout.len() {
                let p = layout.locate(i).unwrap();
                prop_assert_eq!(layout.index(p), Some(i));
            }
            prop_assert!(layout.locate(layout.len()).is_none());
        }
    }
}
