//! Why did the network answer this way?
//!
//! [`integrated_gradients`] attributes an output to input features along a
//! straight path from a baseline. [`ore_greedy`] finds a small set of
//! features which, pinned to their values, provably keep the predicted
//! label under any ε-perturbation of the others.

mod ig;
mod ore;

use serde_json::json;

pub use ig::{input_gradient, integrated_gradients, Attribution, DEFAULT_IG_STEPS};
pub use ore::{
    brute_force_minimum, check_explanation, explanation_box, ore_greedy, ExplainConfig, RobustExplanation,
    BRUTE_FORCE_MAX_DIM,
};

/// `{"fixed", "epsilon", "cost", "ig", "verified"}`.
pub fn explanation_report(explanation: &RobustExplanation, attribution: &Attribution) -> serde_json::Value {
    json!({
        "fixed": explanation.fixed_features,
        "epsilon": explanation.epsilon,
        "cost": explanation.cost,
        "ig": attribution.scores,
        "verified": explanation.verified,
    })
}
