//! Certification toolkit for feed-forward ReLU networks.
//!
//! The crate is organised by analysis direction:
//!
//! - [`model`]: network representation, JSON loading, concrete evaluation.
//! - [`property`]: pre/postconditions, robustness and quantitative specs.
//! - [`geometry`]: halfspace polytopes, a dense simplex LP solver, 2-D vertex
//!   enumeration and volume estimation.
//! - [`bounds`]: sound forward analysis (interval, zonotope, linear bound
//!   propagation).
//! - [`complete`]: branch-and-bound verification, activation-pattern
//!   enumeration, MILP export and maximal-safe-radius search.
//! - [`preimage`]: exact and under-approximate preimages, linear regions,
//!   quantitative verification.
//! - [`explain`]: integrated gradients and optimal robust explanations.
//! - [`report`]: JSON report types shared by the command-line front end.
//!
//! Every analysis is a pure function of an immutable [`model::Network`].
//!
//! ## Examples
//!
//! Each capability has a runnable example on the two-input network of
//! [`model::running_example`]:
//!
//! ```bash
//! cargo run --example forward_pass
//! cargo run --example bound_propagation
//! cargo run --example branch_and_bound
//! cargo run --example milp_export > query.lp
//! cargo run --example exact_preimage
//! cargo run --example linear_regions
//! cargo run --example quantitative -- 0.9
//! cargo run --example integrated_gradients
//! cargo run --example robust_explanation
//! cargo run --example safe_radius
//! cargo run --example polytopes
//! ```

pub mod bounds;
pub mod complete;
pub mod error;
pub mod explain;
pub mod geometry;
pub mod model;
pub mod preimage;
pub mod property;
pub mod report;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use model::{Activation, Layer, Network};
pub use property::{InputBox, OutputPolytope, QuantitativeSpec, RobustnessSpec};

/// Absolute slack used when comparing a certified bound against a
/// postcondition threshold. Kept well below [`complete::STRICT_MARGIN`] so
/// that tie points under a strict-margin property are never verified.
pub const VERDICT_GUARD: f64 = 1e-12;
