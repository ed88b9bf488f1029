//! Seeded random networks and problems for property tests and examples.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{crown_propagate, AlphaPolicy};
use crate::model::{Activation, Layer, Network};
use crate::property::{InputBox, OutputPolytope};

#[derive(Debug, Clone, Copy)]
pub struct NetShape {
    pub input_dims: (usize, usize),
    pub hidden_layers: (usize, usize),
    pub width: (usize, usize),
    pub output_dims: (usize, usize),
}

impl Default for NetShape {
    fn default() -> Self {
        Self {
            input_dims: (2, 4),
            hidden_layers: (1, 3),
            width: (2, 8),
            output_dims: (2, 3),
        }
    }
}

/// Dense ReLU network with weights in [−1, 1], biases in [−0.5, 0.5] and
/// an identity output layer.
pub fn random_network(rng: &mut impl Rng, shape: &NetShape) -> Network {
    let d = rng.random_range(shape.input_dims.0..=shape.input_dims.1);
    let hidden = rng.random_range(shape.hidden_layers.0..=shape.hidden_layers.1);
    let out = rng.random_range(shape.output_dims.0..=shape.output_dims.1);
    let mut widths: Vec<usize> = (0..hidden)
        .map(|_| rng.random_range(shape.width.0..=shape.width.1))
        .collect();
    widths.push(out);
    let mut prev = d;
    let mut layers = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        let weight = Array2::from_shape_fn((w, prev), |_| rng.random_range(-1.0..1.0));
        let bias = Array1::from_shape_fn(w, |_| rng.random_range(-0.5..0.5));
        let act = if i + 1 == widths.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(weight, bias, act));
        prev = w;
    }
    Network::new(d, layers).expect("generated shapes agree")
}

pub fn random_box(rng: &mut impl Rng, dim: usize) -> InputBox {
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let radius: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..0.6)).collect();
    InputBox::new(
        center.iter().zip(&radius).map(|(c, r)| c - r).collect(),
        center.iter().zip(&radius).map(|(c, r)| c + r).collect(),
    )
    .expect("positive radii")
}

/// One random row `a·y ≤ b` with `b` inside the certified range of `a·y`,
/// so that both outcomes are plausible.
pub fn random_post(rng: &mut impl Rng, net: &Network, input: &InputBox) -> OutputPolytope {
    let m = net.output_dim();
    let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let crown = crown_propagate(net, input, &AlphaPolicy::Zero).expect("shapes agree");
    let (mut lo, mut hi) = (0.0, 0.0);
    for (j, c) in a.iter().enumerate() {
        let (l, u) = (crown.lower[j], crown.upper[j]);
        lo += if *c >= 0.0 { c * l } else { c * u };
        hi += if *c >= 0.0 { c * u } else { c * l };
    }
    let b = lo + rng.random_range(0.2..1.0) * (hi - lo);
    OutputPolytope::from_rows(&[a], &[b]).expect("one row")
}

/// A verification problem whose box leaves at most `max_unstable` neurons
/// undecided by linear bounds. Retries with fresh draws until one fits.
pub fn random_problem(seed: u64, shape: &NetShape, max_unstable: usize) -> (Network, InputBox, OutputPolytope) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let net = random_network(&mut rng, shape);
        let input = random_box(&mut rng, net.input_dim());
        let crown = crown_propagate(&net, &input, &AlphaPolicy::Zero).expect("shapes agree");
        if crown.bounds.unstable(&net).len() <= max_unstable {
            let post = random_post(&mut rng, &net, &input);
            return (net, input, post);
        }
    }
}
