use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("simplex did not converge within {iterations} pivots")]
    LpIterationLimit { iterations: usize },

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("polytope must be 2-dimensional, got dimension {0}")]
    NotPlanar(usize),

    #[error("enumeration size {count} exceeds the cap of {cap}")]
    CapExceeded { count: usize, cap: usize },

    #[error("neuron {neuron} of layer {layer} has non-finite bounds; tighten before export")]
    UnboundedNeuron { layer: usize, neuron: usize },

    #[error("input is classified as {predicted}, not the requested label {requested}")]
    LabelMismatch { predicted: usize, requested: usize },

    #[error("{0}")]
    InvalidArgument(String),
}
