use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Network;

pub const DEFAULT_IG_STEPS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub scores: Vec<f64>,
    pub baseline: Vec<f64>,
    pub steps: usize,
    pub target: usize,
}

/// Gradient of output `target` at `x`. A neuron with pre-activation
/// exactly zero counts as inactive (derivative 0).
pub fn input_gradient(net: &Network, x: &[f64], target: usize) -> Result<Vec<f64>> {
    check_target(net, target)?;
    let pattern = net.activation_pattern(x)?;
    let (m, _) = net.linearize(&pattern).pop().expect("at least one layer");
    Ok(m.row(target).to_vec())
}

fn check_target(net: &Network, target: usize) -> Result<()> {
    if target >= net.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} outputs",
            net.output_dim()
        )));
    }
    Ok(())
}

/// Path integral of the gradient of output `target` from `baseline` to `x`,
/// approximated with `steps` midpoint samples.
///
/// Consecutive samples with the same activation pattern share one gradient
/// evaluation and are weighted together, so a model that is affine along
/// the path gets the same attribution for every `steps`.
pub fn integrated_gradients(
    net: &Network,
    x: &[f64],
    baseline: &[f64],
    target: usize,
    steps: usize,
) -> Result<Attribution> {
    net.check_input(x)?;
    net.check_input(baseline)?;
    check_target(net, target)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let d = x.len();
    let delta: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let point = |s: usize| -> Vec<f64> {
        let t = (s as f64 + 0.5) / steps as f64;
        baseline.iter().zip(&delta).map(|(b, dl)| b + t * dl).collect()
    };
    let mut avg = vec![0.0; d];
    let mut s = 0;
    while s < steps {
        let p = point(s);
        let pattern = net.activation_pattern(&p)?;
        let mut run = 1;
        while s + run < steps && net.activation_pattern(&point(s + run))? == pattern {
            run += 1;
        }
        let (m, _) = net.linearize(&pattern).pop().expect("at least one layer");
        let w = run as f64 / steps as f64;
        for (a, g) in avg.iter_mut().zip(m.row(target)) {
            *a += w * g;
        }
        s += run;
    }
    Ok(Attribution {
        scores: avg.iter().zip(&delta).map(|(g, dl)| g * dl).collect(),
        baseline: baseline.to_vec(),
        steps,
        target,
    })
}
