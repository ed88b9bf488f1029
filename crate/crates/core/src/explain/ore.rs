use rayon::prelude::*;
use serde::Serialize;

use crate::complete::{verify_complete, BabConfig, VerificationStatus, STRICT_MARGIN};
use crate::error::{Error, Result};
use crate::model::Network;
use crate::property::{label_polytope, InputBox};

/// Subset sizes the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    /// Required lead of the label over every other output; 0 allows ties.
    pub margin: f64,
    pub bab: BabConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            margin: 0.0,
            bab: BabConfig::default(),
        }
    }
}

impl ExplainConfig {
    /// The label must win by [`STRICT_MARGIN`].
    pub fn strict() -> Self {
        Self {
            margin: STRICT_MARGIN,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustExplanation {
    /// Sorted indices of the features pinned to their values at `x`.
    pub fixed_features: Vec<usize>,
    /// Box with fixed features pinned and the rest widened by `epsilon`.
    pub free_box: InputBox,
    pub epsilon: f64,
    pub cost: f64,
    pub verified: bool,
}

/// Box pinning `fixed` at `x` and widening every other coordinate by `epsilon`.
pub fn explanation_box(x: &[f64], epsilon: f64, fixed: &[usize]) -> Result<InputBox> {
    let mut lower = x.to_vec();
    let mut upper = x.to_vec();
    for i in 0..x.len() {
        if !fixed.contains(&i) {
            lower[i] -= epsilon;
            upper[i] += epsilon;
        }
    }
    InputBox::new(lower, upper)
}

/// Does pinning `fixed` guarantee `label` under every perturbation of the
/// other features? Anything short of a proof, budget exhaustion included,
/// answers `false`.
pub fn check_explanation(
    net: &Network,
    x: &[f64],
    epsilon: f64,
    label: usize,
    fixed: &[usize],
    config: &ExplainConfig,
) -> Result<bool> {
    net.check_input(x)?;
    check_label(net, label)?;
    if let Some(&bad) = fixed.iter().find(|&&i| i >= x.len()) {
        return Err(Error::InvalidArgument(format!("feature {bad} out of range")));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} must be finite and ≥ 0"
        )));
    }
    let input = explanation_box(x, epsilon, fixed)?;
    let post = label_polytope(label, net.output_dim(), config.margin);
    let verdict = verify_complete(net, &input, &post, &config.bab)?;
    Ok(verdict.status == VerificationStatus::Verified)
}

fn check_label(net: &Network, label: usize) -> Result<()> {
    if label >= net.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} outputs",
            net.output_dim()
        )));
    }
    Ok(())
}

/// Free features one at a time, least important first, keeping each one
/// free only if the label stays provably invariant. A final pass retries
/// every feature still fixed.
///
/// `ranking` holds one importance score per feature (usually integrated
/// gradients); ties go to the lower index.
pub fn ore_greedy(
    net: &Network,
    x: &[f64],
    epsilon: f64,
    label: usize,
    ranking: &[f64],
    config: &ExplainConfig,
) -> Result<RobustExplanation> {
    net.check_input(x)?;
    check_label(net, label)?;
    if ranking.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: ranking.len(),
        });
    }
    let predicted = net.predicted_label(x)?;
    if predicted != label {
        return Err(Error::LabelMismatch {
            predicted,
            requested: label,
        });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| ranking[a].abs().total_cmp(&ranking[b].abs()).then(a.cmp(&b)));

    let without = |fixed: &[usize], i: usize| -> Vec<usize> { fixed.iter().copied().filter(|&j| j != i).collect() };
    let mut fixed: Vec<usize> = (0..x.len()).collect();
    for &i in &order {
        let candidate = without(&fixed, i);
        if check_explanation(net, x, epsilon, label, &candidate, config)? {
            fixed = candidate;
        }
    }
    // a timed-out check can leave a feature fixed that a later retry frees
    loop {
        let freeable: Vec<bool> = fixed
            .par_iter()
            .map(|&i| check_explanation(net, x, epsilon, label, &without(&fixed, i), config))
            .collect::<Result<_>>()?;
        match order
            .iter()
            .find(|i| fixed.iter().position(|j| j == *i).is_some_and(|p| freeable[p]))
        {
            Some(&i) => fixed = without(&fixed, i),
            None => break,
        }
    }
    let verified = check_explanation(net, x, epsilon, label, &fixed, config)?;
    Ok(RobustExplanation {
        cost: fixed.len() as f64,
        free_box: explanation_box(x, epsilon, &fixed)?,
        fixed_features: fixed,
        epsilon,
        verified,
    })
}

/// Smallest fixed set that passes [`check_explanation`], by trying every
/// subset in order of size. `None` when even the full set fails.
pub fn brute_force_minimum(
    net: &Network,
    x: &[f64],
    epsilon: f64,
    label: usize,
    config: &ExplainConfig,
) -> Result<Option<Vec<usize>>> {
    let d = x.len();
    if d > BRUTE_FORCE_MAX_DIM {
        return Err(Error::CapExceeded {
            count: d,
            cap: BRUTE_FORCE_MAX_DIM,
        });
    }
    let mut masks: Vec<u32> = (0..1u32 << d).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for m in masks {
        let fixed: Vec<usize> = (0..d).filter(|i| m >> i & 1 == 1).collect();
        if check_explanation(net, x, epsilon, label, &fixed, config)? {
            return Ok(Some(fixed));
        }
    }
    Ok(None)
}
