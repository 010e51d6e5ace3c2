//! Feed-forward spiking network trained by backpropagation through time.
//!
//! Each layer is a dense affine map followed by a layer of LiF neurons;
//! the output layer spikes too, so decoders read its raster directly. All
//! parameters live in one flat vector so the optimiser and checkpoints can
//! treat them uniformly. Per-layer decay rates are stored as logits and
//! mapped through a sigmoid, which keeps them inside `(0, 1)` whatever the
//! optimiser does.

mod bptt;
mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::LifParams;

pub use bptt::{ForwardTape, Mode};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub hidden_width: usize,
    pub num_hidden_layers: usize,
    pub output_width: usize,
    pub neuron: LifParams,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.output_width == 0 {
            return Err(Error::Config("network widths must be positive".into()));
        }
        if self.num_hidden_layers > 0 && self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        self.neuron.validate()
    }

    /// `(inputs, outputs)` of every dense layer, input side first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_width];
        widths.extend(std::iter::repeat_n(
            self.hidden_width,
            self.num_hidden_layers,
        ));
        widths.push(self.output_width);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
    beta: usize,
    alpha: usize,
}

/// Weights `[out × in]`, biases `[out]` and decay logits for every layer.
///
/// Gradients use the same type and layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub data: Vec<f64>,
    layout: Vec<LayerLayout>,
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl NetworkParams {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let mut layout = Vec::new();
        let mut off = 0;
        for (inputs, outputs) in spec.layer_shapes() {
            let l = LayerLayout {
                inputs,
                outputs,
                weights: off,
                bias: off + inputs * outputs,
                beta: off + inputs * outputs + outputs,
                alpha: off + inputs * outputs + outputs + 1,
            };
            off = l.alpha + 1;
            layout.push(l);
        }
        Self {
            data: vec![0.0; off],
            layout,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            layout: self.layout.clone(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    /// `(inputs, outputs)` of layer `l`.
    pub fn shape(&self, l: usize) -> (usize, usize) {
        (self.layout[l].inputs, self.layout[l].outputs)
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let y = &self.layout[l];
        &self.data[y.weights..y.bias]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let y = self.layout[l];
        &mut self.data[y.weights..y.bias]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let y = &self.layout[l];
        &self.data[y.bias..y.beta]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let y = self.layout[l];
        &mut self.data[y.bias..y.beta]
    }

    /// Membrane decay logit of layer `l` (or its gradient).
    pub fn beta_logit(&self, l: usize) -> f64 {
        self.data[self.layout[l].beta]
    }

    pub fn alpha_logit(&self, l: usize) -> f64 {
        self.data[self.layout[l].alpha]
    }

    pub fn beta_logit_mut(&mut self, l: usize) -> &mut f64 {
        &mut self.data[self.layout[l].beta]
    }

    pub fn alpha_logit_mut(&mut self, l: usize) -> &mut f64 {
        &mut self.data[self.layout[l].alpha]
    }

    pub fn beta(&self, l: usize) -> f64 {
        sigmoid(self.beta_logit(l))
    }

    pub fn alpha(&self, l: usize) -> f64 {
        sigmoid(self.alpha_logit(l))
    }

    /// Flat indices of the decay logits, for freezing them.
    pub fn decay_indices(&self) -> Vec<usize> {
        self.layout.iter().flat_map(|l| [l.beta, l.alpha]).collect()
    }

    pub fn add_assign(&mut self, other: &NetworkParams) {
        debug_assert_eq!(self.layout, other.layout);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.layout
            .iter()
            .map(|l| (l.inputs, l.outputs))
            .eq(spec.layer_shapes())
    }

    /// Order-sensitive hash of the parameter bits.
    pub(crate) fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in &self.data {
            h ^= x.to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// Draws initial parameters: weights uniform in `±1/sqrt(fan_in)`, zero
/// biases, decays from the neuron configuration.
pub fn init(spec: &NetworkSpec) -> Result<NetworkParams> {
    spec.validate()?;
    let mut p = NetworkParams::zeros(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for l in 0..p.num_layers() {
        let (fan_in, _) = p.shape(l);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for w in p.weights_mut(l) {
            *w = rng.random_range(-bound..=bound);
        }
        *p.beta_logit_mut(l) = logit(spec.neuron.beta);
        *p.alpha_logit_mut(l) = logit(spec.neuron.alpha);
    }
    Ok(p)
}

/// Parameters bound to the specification that shaped them.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let params = init(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn from_parts(spec: NetworkSpec, params: NetworkParams) -> Result<Self> {
        spec.validate()?;
        if !params.matches(&spec) {
            return Err(Error::Shape("parameters do not match network spec".into()));
        }
        Ok(Self { spec, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.data.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, hidden: usize, layers: usize, output: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            input_width: input,
            hidden_width: hidden,
            num_hidden_layers: layers,
            output_width: output,
            neuron: LifParams::default(),
            seed,
        }
    }

    #[test]
    fn init_is_seeded() {
        let s = spec(10, 16, 2, 10, 42);
        assert_eq!(init(&s).unwrap(), init(&s).unwrap());
        assert_ne!(init(&s).unwrap(), init(&spec(10, 16, 2, 10, 43)).unwrap());
    }

    #[test]
    fn init_bounds_and_zero_bias() {
        let s = spec(100, 20, 1, 5, 1);
        let p = init(&s).unwrap();
        assert!(p.weights(0).iter().all(|w| w.abs() <= 0.1));
        assert!(p.weights(0).iter().any(|w| w.abs() > 0.09));
        for l in 0..p.num_layers() {
            assert!(p.bias(l).iter().all(|&b| b == 0.0));
            assert!((p.beta(l) - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_sizes() {
        let s = spec(3, 4, 2, 2, 0);
        assert_eq!(s.layer_shapes(), vec![(3, 4), (4, 4), (4, 2)]);
        let p = NetworkParams::zeros(&s);
        assert_eq!(p.data.len(), (12 + 4 + 2) + (16 + 4 + 2) + (8 + 2 + 2));
        assert!(p.matches(&s));
        assert!(!p.matches(&spec(3, 4, 1, 2, 0)));
    }
}
