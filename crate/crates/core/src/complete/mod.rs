//! Complete verification over ReLU activations.
//!
//! [`verify_complete`] runs branch-and-bound over unstable neurons with
//! linear bound propagation per subproblem, LP sharpening near the decision
//! threshold, and counterexample search at every node. The remaining
//! operations reuse the same machinery: [`enumerate_patterns`] is the exact
//! oracle, [`export_milp`] renders the big-M encoding in LP file format and
//! [`msr_bounds`] binary-searches the maximal safe radius.

mod bab;
mod milp;
mod msr;
mod pattern;

pub use bab::{branch_score, verify_complete, BabConfig, BabStats, Budget, VerificationStatus, VerificationVerdict};
pub use milp::{export_milp, MilpConstraint, MilpModel, MilpSense, MilpVariable};
pub use msr::{msr_bounds, MsrProbe, MsrResult};
pub use pattern::{enumerate_patterns, ActivationPattern, NeuronStatus, DEFAULT_PATTERN_CAP};

pub(crate) use pattern::sign_row;

/// Margin turning the robustness postcondition into a strict inequality:
/// `y_label − y_j ≥ STRICT_MARGIN`. Ties count as violations.
pub const STRICT_MARGIN: f64 = 1e-9;
