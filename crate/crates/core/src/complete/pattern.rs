use std::fmt;

use serde::Serialize;

use crate::bounds::{AlphaPolicy, Crown, NeuronBounds};
use crate::error::{Error, Result};
use crate::geometry::HalfspacePolytope;
use crate::model::Network;
use crate::property::InputBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NeuronStatus {
    Active,
    Inactive,
    Unstable,
}

/// Status of every neuron, one vector per layer. Identity layers are always
/// `Active`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    status: Vec<Vec<NeuronStatus>>,
}

impl ActivationPattern {
    /// Every ReLU neuron `Unstable`.
    pub fn unconstrained(net: &Network) -> Self {
        Self {
            status: net
                .layers()
                .iter()
                .map(|l| {
                    let s = if l.is_relu() {
                        NeuronStatus::Unstable
                    } else {
                        NeuronStatus::Active
                    };
                    vec![s; l.output_dim()]
                })
                .collect(),
        }
    }

    /// `u ≤ 0 ⇒ Inactive`, `l ≥ 0 ⇒ Active`, otherwise `Unstable`.
    pub fn from_bounds(net: &Network, bounds: &NeuronBounds) -> Self {
        let mut p = Self::unconstrained(net);
        for (i, j) in net.relu_neurons() {
            let (l, u) = (bounds.lower[i][j], bounds.upper[i][j]);
            p.status[i][j] = if l >= 0.0 {
                NeuronStatus::Active
            } else if u <= 0.0 {
                NeuronStatus::Inactive
            } else {
                NeuronStatus::Unstable
            };
        }
        p
    }

    /// Pattern realized at a point (zero pre-activation counts as inactive).
    pub fn at_point(net: &Network, x: &[f64]) -> Result<Self> {
        let mask = net.activation_pattern(x)?;
        Ok(Self {
            status: mask
                .into_iter()
                .map(|v| {
                    v.into_iter()
                        .map(|on| {
                            if on {
                                NeuronStatus::Active
                            } else {
                                NeuronStatus::Inactive
                            }
                        })
                        .collect()
                })
                .collect(),
        })
    }

    pub fn get(&self, layer: usize, neuron: usize) -> NeuronStatus {
        self.status[layer][neuron]
    }

    pub fn set(&mut self, layer: usize, neuron: usize, status: NeuronStatus) {
        self.status[layer][neuron] = status;
    }

    pub fn with(&self, layer: usize, neuron: usize, status: NeuronStatus) -> Self {
        let mut p = self.clone();
        p.set(layer, neuron, status);
        p
    }

    pub fn layers(&self) -> &[Vec<NeuronStatus>] {
        &self.status
    }

    pub fn unstable(&self) -> Vec<(usize, usize)> {
        self.status
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.iter()
                    .enumerate()
                    .filter(|(_, s)| **s == NeuronStatus::Unstable)
                    .map(move |(j, _)| (i, j))
            })
            .collect()
    }

    pub fn is_fully_fixed(&self) -> bool {
        self.status.iter().flatten().all(|s| *s != NeuronStatus::Unstable)
    }

    /// `true` for active neurons; unstable ones are reported as active.
    pub fn active_mask(&self) -> Vec<Vec<bool>> {
        self.status
            .iter()
            .map(|l| l.iter().map(|s| *s != NeuronStatus::Inactive).collect())
            .collect()
    }

    /// Merge with bound-derived statuses: neurons unstable here take the
    /// status implied by `bounds` when it is stable.
    pub fn refined_by(&self, net: &Network, bounds: &NeuronBounds) -> Self {
        let from_bounds = Self::from_bounds(net, bounds);
        let mut p = self.clone();
        for (i, j) in net.relu_neurons() {
            if p.status[i][j] == NeuronStatus::Unstable {
                p.status[i][j] = from_bounds.status[i][j];
            }
        }
        p
    }

    /// `"10|11"`: one character per neuron of each ReLU layer (`1` active,
    /// `0` inactive, `u` unstable), layers separated by `|`.
    pub fn tag(&self, net: &Network) -> String {
        self.to_string_for(|i| net.layers()[i].is_relu())
    }

    fn to_string_for(&self, include: impl Fn(usize) -> bool) -> String {
        self.status
            .iter()
            .enumerate()
            .filter(|(i, _)| include(*i))
            .map(|(_, l)| {
                l.iter()
                    .map(|s| match s {
                        NeuronStatus::Active => '1',
                        NeuronStatus::Inactive => '0',
                        NeuronStatus::Unstable => 'u',
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.status.len().saturating_sub(1);
        f.write_str(&self.to_string_for(|i| i < last))
    }
}

pub const DEFAULT_PATTERN_CAP: usize = 20;

/// Halfspace `ẑ ≥ 0` (active) or `ẑ ≤ 0` (inactive) for an affine
/// pre-activation `ẑ = m·x + c`, as a row of `A·x ≤ b`.
pub(crate) fn sign_row(m: &[f64], c: f64, active: bool) -> (Vec<f64>, f64) {
    if active {
        (m.iter().map(|v| -v).collect(), c)
    } else {
        (m.to_vec(), -c)
    }
}

/// Partition `input` into the activation patterns realized on it.
///
/// Neurons stable over the box (by linear bound propagation) keep their
/// status; the remaining ones are split depth-first in layer-major order,
/// pruning infeasible branches. Polytopes sharing a facet overlap only on
/// that facet; lower-dimensional pieces are kept.
pub fn enumerate_patterns(
    net: &Network,
    input: &InputBox,
    cap: usize,
) -> Result<Vec<(ActivationPattern, HalfspacePolytope)>> {
    let crown = Crown::new(net, input, &AlphaPolicy::Zero, None)?;
    let base = ActivationPattern::from_bounds(net, crown.bounds());
    let unstable = base.unstable();
    if unstable.len() > cap {
        return Err(Error::CapExceeded {
            count: unstable.len(),
            cap,
        });
    }
    let mut out = Vec::new();
    descend(net, &unstable, 0, base, input.to_polytope(), &mut out)?;
    Ok(out)
}

fn descend(
    net: &Network,
    unstable: &[(usize, usize)],
    next: usize,
    pattern: ActivationPattern,
    poly: HalfspacePolytope,
    out: &mut Vec<(ActivationPattern, HalfspacePolytope)>,
) -> Result<()> {
    let Some(&(layer, neuron)) = unstable.get(next) else {
        out.push((pattern, poly));
        return Ok(());
    };
    let maps = net.linearize(&pattern.active_mask());
    let (m, c) = &maps[layer];
    let row = m.row(neuron).to_vec();
    // constant pre-activation: only one side is realized (zero is inactive)
    let choices: &[bool] = if row.iter().all(|v| *v == 0.0) {
        if c[neuron] > 0.0 {
            &[true]
        } else {
            &[false]
        }
    } else {
        &[true, false]
    };
    for &active in choices {
        let (a, b) = sign_row(&row, c[neuron], active);
        let mut child = poly.clone();
        child.push(&a, b);
        if child.is_feasible()? {
            let status = if active {
                NeuronStatus::Active
            } else {
                NeuronStatus::Inactive
            };
            descend(net, unstable, next + 1, pattern.with(layer, neuron, status), child, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{volume_of_union, VolumeMethod};
    use crate::model::{running_example, Activation, Layer};
    use ndarray::array;

    fn square() -> InputBox {
        InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn running_example_partition() {
        let net = running_example();
        let parts = enumerate_patterns(&net, &square(), DEFAULT_PATTERN_CAP).unwrap();
        assert!(parts.len() <= 8);
        let polys: Vec<_> = parts.iter().map(|(_, p)| p.clone()).collect();
        let area = volume_of_union(&polys, VolumeMethod::Exact2D, &square()).unwrap();
        assert!((area - 4.0).abs() < 1e-9, "{area} {parts:?}");
        // grid oracle: every point lies in the polytope of its own pattern
        for i in 0..=200 {
            for j in 0..=200 {
                let x = [-1.0 + i as f64 * 0.01, -1.0 + j as f64 * 0.01];
                let containing: Vec<_> = parts.iter().filter(|(_, p)| p.contains(&x, 1e-9)).collect();
                assert!(!containing.is_empty());
                if containing.len() > 1 {
                    // only on shared facets
                    let pre = net.pre_activations(&x).unwrap();
                    assert!(pre[..2].iter().flatten().any(|v| v.abs() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn single_region_box() {
        let net = running_example();
        let bx = InputBox::new(vec![0.8, 0.1], vec![0.9, 0.2]).unwrap();
        let parts = enumerate_patterns(&net, &bx, DEFAULT_PATTERN_CAP).unwrap();
        assert_eq!(parts.len(), 1);
        assert!(parts[0].0.is_fully_fixed());
    }

    #[test]
    fn affine_net_single_pattern() {
        let net = Network::new(
            2,
            vec![
                Layer::new(array![[1.0, 2.0]], array![0.0], Activation::Identity),
                Layer::new(array![[3.0]], array![1.0], Activation::Identity),
            ],
        )
        .unwrap();
        let parts = enumerate_patterns(&net, &square(), 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1, square().to_polytope());
    }

    #[test]
    fn cap_is_enforced() {
        let net = running_example();
        assert!(matches!(
            enumerate_patterns(&net, &square(), 2),
            Err(Error::CapExceeded { count: 3, cap: 2 })
        ));
    }

    #[test]
    fn tags() {
        let net = running_example();
        let p = ActivationPattern::at_point(&net, &[0.9, 0.1]).unwrap();
        assert_eq!(p.tag(&net), "11|11");
        assert_eq!(p.to_string(), "11|11");
        let p = ActivationPattern::at_point(&net, &[-1.0, 0.0]).unwrap();
        assert_eq!(p.tag(&net), "00|00");
    }
}
