use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Network;
use crate::property::{label_polytope, InputBox};

use super::{verify_complete, BabConfig, VerificationStatus, STRICT_MARGIN};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsrProbe {
    pub epsilon: f64,
    pub status: VerificationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsrResult {
    /// Largest radius proved robust.
    pub lower: f64,
    /// Smallest radius with a counterexample, or the cap.
    pub upper: f64,
    pub probes: Vec<MsrProbe>,
    /// Probes that ran out of budget.
    pub inconclusive: usize,
}

/// Bracket the maximal ℓ∞ radius around `x` on which `label` wins every
/// comparison by at least [`STRICT_MARGIN`].
///
/// Radii are probed on the grid `k·tol` (plus `cap` itself), so the lower
/// bound does not depend on `cap` once `cap` exceeds the true radius.
pub fn msr_bounds(net: &Network, x: &[f64], label: usize, cap: f64, tol: f64, config: &BabConfig) -> Result<MsrResult> {
    net.check_input(x)?;
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("cap must be positive, got {cap}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if label >= net.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} outputs",
            net.output_dim()
        )));
    }
    let post = label_polytope(label, net.output_dim(), STRICT_MARGIN);
    let mut result = MsrResult {
        lower: 0.0,
        upper: cap,
        probes: Vec::new(),
        inconclusive: 0,
    };
    let probe = |eps: f64, result: &mut MsrResult| -> Result<VerificationStatus> {
        let status = verify_complete(net, &InputBox::around(x, eps)?, &post, config)?.status;
        result.probes.push(MsrProbe { epsilon: eps, status });
        if status == VerificationStatus::Unknown {
            result.inconclusive += 1;
        }
        Ok(status)
    };

    if probe(cap, &mut result)? == VerificationStatus::Verified {
        result.lower = cap;
        return Ok(result);
    }
    // x itself may already violate the margin
    if probe(0.0, &mut result)? != VerificationStatus::Verified {
        result.upper = 0.0;
        return Ok(result);
    }
    let steps = (cap / tol).ceil() as u64;
    let (mut lo, mut hi) = (0u64, steps);
    let radius = |k: u64| (k as f64 * tol).min(cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match probe(radius(mid), &mut result)? {
            VerificationStatus::Verified => lo = mid,
            VerificationStatus::Falsified => {
                hi = mid;
                result.upper = radius(mid);
            }
            // cannot certify at mid: search below it, upper stays put
            VerificationStatus::Unknown => hi = mid,
        }
    }
    result.lower = radius(lo);
    Ok(result)
}
