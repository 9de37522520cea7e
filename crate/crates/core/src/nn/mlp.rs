use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Squash {
    #[default]
    None,
    Sigmoid,
    Softplus,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Squash {
    fn apply(self, x: f64) -> f64 {
        match self {
            Squash::None => x,
            Squash::Sigmoid => sigmoid(x),
            Squash::Softplus => softplus(x),
        }
    }
}

/// Fully connected network shape.
///
/// Parameters are laid out layer by layer, each as a row-major
/// `out x in` weight matrix followed by the `out` biases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub output_squash: Squash,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers,
            output_dim,
            activation: Activation::Tanh,
            output_squash: Squash::None,
        }
    }

    pub fn with_squash(mut self, squash: Squash) -> Self {
        self.output_squash = squash;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig("network dimensions must be positive".into()));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden_layers);
        w.push(self.output_dim);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], rng: &mut R) {
        assert_eq!(params.len(), self.param_count(), "parameter slice length");
        let mut off = 0;
        for pair in self.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            off += fan_in * fan_out;
            params[off..off + fan_out].fill(0.0);
            off += fan_out;
        }
    }
}

/// Affine layers with the hidden activation, output squash applied last.
pub fn mlp_forward(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: x.len(),
        });
    }
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    let widths = spec.widths();
    let layers = widths.len() - 1;
    let mut cur = x.to_vec();
    let mut off = 0;
    for (l, pair) in widths.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let mut next = b.to_vec();
        for (o, acc) in next.iter_mut().enumerate() {
            let row = &w[o * n_in..(o + 1) * n_in];
            *acc += row.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
        }
        if l + 1 < layers {
            for v in next.iter_mut() {
                *v = spec.activation.apply(*v);
            }
        }
        cur = next;
    }
    for v in cur.iter_mut() {
        *v = spec.output_squash.apply(*v);
    }
    Ok(cur)
}
