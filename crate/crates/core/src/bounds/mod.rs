//! Sound, incomplete forward analysis.
//!
//! Three methods share the [`NeuronBounds`] representation: plain interval
//! arithmetic, zonotopes with the minimal-area ReLU transformer, and linear
//! bound propagation by backward substitution (CROWN-style) with the
//! chord/α relaxation of unstable ReLUs.

mod crown;
mod interval;
mod zonotope;

use ndarray::Array1;
use serde::Serialize;

pub use crown::{crown_propagate, AffineBound, AlphaPolicy, Crown, CrownResult, LinearBounds, ReluRelaxation};
pub use interval::{interval_propagate, IntervalResult};
pub use zonotope::{zonotope_propagate, Zonotope, ZonotopeResult};

use crate::error::Result;
use crate::model::Network;
use crate::property::{InputBox, OutputPolytope};
use crate::VERDICT_GUARD;

/// Pre-activation bounds of every layer; the last layer is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub lower: Vec<Array1<f64>>,
    pub upper: Vec<Array1<f64>>,
}

impl NeuronBounds {
    pub fn layer(&self, i: usize) -> (&Array1<f64>, &Array1<f64>) {
        (&self.lower[i], &self.upper[i])
    }

    pub fn output(&self) -> (Vec<f64>, Vec<f64>) {
        let last = self.lower.len() - 1;
        (self.lower[last].to_vec(), self.upper[last].to_vec())
    }

    /// Neurons of ReLU layers whose interval straddles zero.
    pub fn unstable(&self, net: &Network) -> Vec<(usize, usize)> {
        net.relu_neurons()
            .into_iter()
            .filter(|&(i, j)| self.lower[i][j] < 0.0 && self.upper[i][j] > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundMethod {
    Interval,
    Zonotope,
    Crown(AlphaPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundVerdict {
    Verified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub verdict: BoundVerdict,
    /// Certified upper bound of `a_r·f(x)` per postcondition row.
    pub row_bounds: Vec<f64>,
    /// `b_r − row_bounds[r]`; nonnegative rows are proved.
    pub margins: Vec<f64>,
}

/// Try to prove `post` over `input` with one forward analysis.
pub fn check_with_bounds(
    net: &Network,
    input: &InputBox,
    post: &OutputPolytope,
    method: &BoundMethod,
) -> Result<BoundCheck> {
    net.check_input(&input.lower)?;
    post.check_dim(net.output_dim())?;
    let rows: Vec<Array1<f64>> = (0..post.num_rows()).map(|r| post.a.row(r).to_owned()).collect();
    let row_bounds: Vec<f64> = match method {
        BoundMethod::Interval => {
            let res = interval_propagate(net, input)?;
            rows.iter()
                .map(|a| interval_row_upper(a, &res.lower, &res.upper))
                .collect()
        }
        BoundMethod::Zonotope => {
            let res = zonotope_propagate(net, input)?;
            rows.iter().map(|a| res.zonotope.row_upper(a)).collect()
        }
        BoundMethod::Crown(policy) => {
            let crown = Crown::new(net, input, policy, None)?;
            rows.iter()
                .map(|a| crown.row_upper(a.as_slice().expect("contiguous")))
                .collect()
        }
    };
    let margins: Vec<f64> = row_bounds.iter().zip(post.b.iter()).map(|(u, b)| b - u).collect();
    let verdict = if margins.iter().all(|m| *m >= -VERDICT_GUARD) {
        BoundVerdict::Verified
    } else {
        BoundVerdict::Unknown
    };
    Ok(BoundCheck {
        verdict,
        row_bounds,
        margins,
    })
}

/// Upper bound of `a·y` for `y` in the box `[lower, upper]`.
pub fn interval_row_upper(a: &Array1<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    a.iter()
        .zip(lower.iter().zip(upper))
        .map(|(c, (l, u))| if *c >= 0.0 { c * u } else { c * l })
        .sum()
}
