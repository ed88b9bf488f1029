//! Feed-forward networks built from affine layers and pointwise ReLU.

use std::io::Read;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine map `W·z + b` followed by a pointwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Self {
        Self {
            weight,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn is_relu(&self) -> bool {
        self.activation == Activation::Relu
    }

    /// Pre-activation `W·z + b`.
    pub fn affine(&self, z: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(z) + &self.bias
    }

    pub fn activate(&self, pre: &Array1<f64>) -> Array1<f64> {
        match self.activation {
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
            Activation::Identity => pre.clone(),
        }
    }
}

/// Immutable, validated network `f = f(L) ∘ ··· ∘ f(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    layers: Vec<LayerJson>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("at least one layer is required".into()));
        }
        let mut expected = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.output_dim() == 0 {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: "layer has no output neurons".into(),
                });
            }
            if layer.input_dim() != expected {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: format!(
                        "expects input dimension {}, previous layer produces {}",
                        layer.input_dim(),
                        expected
                    ),
                });
            }
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: format!(
                        "bias length {} does not match {} weight rows",
                        layer.bias.len(),
                        layer.output_dim()
                    ),
                });
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: "non-finite weight or bias entry".into(),
                });
            }
            expected = layer.output_dim();
        }
        let last = layers.len() - 1;
        if layers[last].activation != Activation::Identity {
            return Err(Error::InvalidLayer {
                layer: last,
                reason: "final layer must use the identity activation".into(),
            });
        }
        Ok(Self { layers, input_dim })
    }

    pub fn from_reader(source: impl Read) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_reader(source)?;
        Self::from_json_model(raw)
    }

    pub fn from_json_str(source: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(source)?;
        Self::from_json_model(raw)
    }

    fn from_json_model(raw: NetworkJson) -> Result<Self> {
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (i, l) in raw.layers.into_iter().enumerate() {
            let activation = match l.activation.to_ascii_lowercase().as_str() {
                "relu" => Activation::Relu,
                "identity" | "linear" => Activation::Identity,
                other => {
                    return Err(Error::InvalidLayer {
                        layer: i,
                        reason: format!("unsupported activation `{other}`"),
                    })
                }
            };
            let rows = l.weights.len();
            let cols = l.weights.first().map_or(0, Vec::len);
            if l.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: "weight rows have different lengths".into(),
                });
            }
            let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
            let weight = Array2::from_shape_vec((rows, cols), flat).map_err(|e| Error::InvalidLayer {
                layer: i,
                reason: e.to_string(),
            })?;
            layers.push(Layer::new(weight, Array1::from(l.bias), activation));
        }
        Self::new(raw.input_dim, layers)
    }

    pub fn to_json(&self) -> String {
        let raw = NetworkJson {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    weights: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                    activation: match l.activation {
                        Activation::Relu => "relu".into(),
                        Activation::Identity => "identity".into(),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("network serialization cannot fail")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// `(layer, neuron)` for every ReLU neuron, in layer-major order.
    pub fn relu_neurons(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_relu())
            .flat_map(|(i, l)| (0..l.output_dim()).map(move |j| (i, j)))
            .collect()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = Array1::from(x.to_vec());
        for layer in &self.layers {
            z = layer.activate(&layer.affine(&z));
        }
        Ok(z.to_vec())
    }

    /// Pre-activation vector of every layer; the last entry is the output.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Array1<f64>>> {
        self.check_input(x)?;
        let mut z = Array1::from(x.to_vec());
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let pre = layer.affine(&z);
            z = layer.activate(&pre);
            trace.push(pre);
        }
        Ok(trace)
    }

    /// Activation status of every neuron at `x` (`true` = passes its input).
    /// A zero pre-activation counts as inactive.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<Vec<bool>>> {
        let pre = self.pre_activations(x)?;
        Ok(self
            .layers
            .iter()
            .zip(pre)
            .map(|(l, p)| match l.activation {
                Activation::Relu => p.iter().map(|&v| v > 0.0).collect(),
                Activation::Identity => vec![true; p.len()],
            })
            .collect())
    }

    /// Index of the largest output; the lowest index wins ties.
    pub fn predicted_label(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// The affine map `x ↦ M·x + c` the network computes when every ReLU
    /// neuron follows `active` (one vector per layer; identity layers are
    /// ignored). Returns the map of every layer's pre-activation.
    pub fn linearize(&self, active: &[Vec<bool>]) -> Vec<(Array2<f64>, Array1<f64>)> {
        let mut map = Array2::<f64>::eye(self.input_dim);
        let mut offset = Array1::<f64>::zeros(self.input_dim);
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let pre_map = layer.weight.dot(&map);
            let pre_off = layer.weight.dot(&offset) + &layer.bias;
            map = pre_map.clone();
            offset = pre_off.clone();
            if layer.is_relu() {
                for (j, &on) in active[i].iter().enumerate() {
                    if !on {
                        map.row_mut(j).fill(0.0);
                        offset[j] = 0.0;
                    }
                }
            }
            out.push((pre_map, pre_off));
        }
        out
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Running example used throughout the docs and tests: two inputs, two ReLU
/// hidden layers of width two, two outputs, zero biases.
pub fn running_example() -> Network {
    use ndarray::array;
    Network::new(
        2,
        vec![
            Layer::new(array![[1.0, 1.0], [1.0, -1.0]], array![0.0, 0.0], Activation::Relu),
            Layer::new(array![[1.0, 3.0], [-1.0, 2.0]], array![0.0, 0.0], Activation::Relu),
            Layer::new(array![[1.0, 0.0], [-2.0, -1.0]], array![0.0, 0.0], Activation::Identity),
        ],
    )
    .expect("running example is well formed")
}
