//! Backward analysis: which inputs land in an output polytope.
//!
//! [`preimage_exact`] pulls the postcondition back layer by layer and
//! returns a union of polytopes; [`linear_regions`] partitions a
//! low-dimensional box into affine pieces; [`preimage_under_approx`] builds
//! a certified inner approximation by input splitting, which
//! [`verify_quantitative`] uses to prove "at least a proportion `p` of the
//! box maps into the postcondition".

mod approx;
mod exact;

use serde::Serialize;
use serde_json::json;

pub use approx::{
    cell_polytope, optimize_alpha, preimage_under_approx, ApproxConfig, Estimator, PreimageApprox, SplitRecord,
    Subdomain, Z99,
};
pub use exact::{linear_regions, preimage_exact, LinearRegion, PreimageExact, PreimagePolytope, DEFAULT_PREIMAGE_CAP};

use crate::error::Result;
use crate::geometry::HalfspacePolytope;
use crate::model::Network;
use crate::property::QuantitativeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantitativeStatus {
    Holds,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantitativeVerdict {
    pub status: QuantitativeStatus,
    pub coverage: f64,
    /// 99% half-width for Monte Carlo coverage, zero when exact.
    pub margin: f64,
    pub estimator: Estimator,
    pub approx: PreimageApprox,
}

/// Prove `vol(preimage ∩ X) / vol(X) ≥ p` from an under-approximation.
///
/// Exact coverage must reach `p`; a Monte Carlo estimate must reach it
/// after subtracting its 99% margin. Failing that the answer is `Unknown`,
/// never a refutation.
pub fn verify_quantitative(
    net: &Network,
    spec: &QuantitativeSpec,
    config: &ApproxConfig,
) -> Result<QuantitativeVerdict> {
    let p = spec.proportion;
    let mut cfg = config.clone();
    cfg.target_coverage = p;
    if spec.input.dim() != 2 && p > 0.0 {
        // aim past the largest possible sampling margin
        cfg.target_coverage = (p + Z99 * 0.5 / (config.samples.max(1) as f64).sqrt()).min(1.0);
    }
    let approx = preimage_under_approx(net, &spec.input, &spec.output, &cfg)?;
    let margin = approx.confidence_margin();
    let status = if approx.coverage - margin >= p {
        QuantitativeStatus::Holds
    } else {
        QuantitativeStatus::Unknown
    };
    Ok(QuantitativeVerdict {
        status,
        coverage: approx.coverage,
        margin,
        estimator: approx.estimator,
        approx,
    })
}

fn polytope_json(p: &HalfspacePolytope, pattern: &str, volume: Option<f64>) -> serde_json::Value {
    let a: Vec<Vec<f64>> = p.a.rows().into_iter().map(|r| r.to_vec()).collect();
    json!({
        "A": a,
        "b": p.b.to_vec(),
        "pattern": pattern,
        "volume": volume,
    })
}

/// `{"polytopes": [{"A", "b", "pattern", "volume"}], "coverage", "iterations"}`.
pub fn exact_export(net: &Network, pre: &PreimageExact, coverage: Option<f64>) -> serde_json::Value {
    json!({
        "polytopes": pre
            .polytopes
            .iter()
            .map(|p| polytope_json(&p.polytope, &p.pattern.tag(net), p.volume))
            .collect::<Vec<_>>(),
        "coverage": coverage,
        "iterations": 0,
    })
}

/// Same layout as [`exact_export`]; `pattern` holds the cell's split path.
pub fn approx_export(approx: &PreimageApprox) -> serde_json::Value {
    json!({
        "polytopes": approx
            .subdomains
            .iter()
            .map(|s| polytope_json(&s.polytope, &s.path, Some(s.volume)))
            .collect::<Vec<_>>(),
        "coverage": approx.coverage,
        "iterations": approx.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VolumeMethod;
    use crate::model::running_example;
    use crate::property::{InputBox, OutputPolytope};

    fn square() -> InputBox {
        InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn y1_ge_y2() -> OutputPolytope {
        OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0]).unwrap()
    }

    #[test]
    fn quantitative_holds_at_ninety_percent() {
        let net = running_example();
        let spec = QuantitativeSpec::new(square(), y1_ge_y2(), 0.9).unwrap();
        let v = verify_quantitative(&net, &spec, &ApproxConfig::default()).unwrap();
        assert_eq!(v.status, QuantitativeStatus::Holds);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn zero_proportion_holds_without_splitting() {
        let net = running_example();
        let spec = QuantitativeSpec::new(square(), y1_ge_y2(), 0.0).unwrap();
        let v = verify_quantitative(&net, &spec, &ApproxConfig::default()).unwrap();
        assert_eq!(v.status, QuantitativeStatus::Holds);
        assert_eq!(v.approx.iterations, 0);
    }

    #[test]
    fn full_measure_is_not_certified() {
        let net = running_example();
        // y1 ≤ 1 holds on a strict subset of the box
        let post = OutputPolytope::from_rows(&[vec![1.0, 0.0]], &[1.0]).unwrap();
        let spec = QuantitativeSpec::new(square(), post, 1.0).unwrap();
        let cfg = ApproxConfig {
            max_iters: 20,
            ..ApproxConfig::default()
        };
        let v = verify_quantitative(&net, &spec, &cfg).unwrap();
        assert_eq!(v.status, QuantitativeStatus::Unknown);
        assert!(v.coverage < 1.0);
    }

    #[test]
    fn export_layout() {
        let net = running_example();
        let mut pre = preimage_exact(&net, &square(), &y1_ge_y2(), DEFAULT_PREIMAGE_CAP).unwrap();
        pre.compute_volumes(VolumeMethod::Exact2D).unwrap();
        let v = exact_export(&net, &pre, Some(1.0));
        assert_eq!(v["polytopes"].as_array().unwrap().len(), 16);
        assert!(v["polytopes"][0]["A"].is_array());
        assert!(v["polytopes"][0]["pattern"].as_str().unwrap().contains('|'));
        let approx = preimage_under_approx(&net, &square(), &y1_ge_y2(), &ApproxConfig::default()).unwrap();
        let v = approx_export(&approx);
        assert_eq!(v["iterations"], 1);
        assert_eq!(v["polytopes"].as_array().unwrap().len(), 2);
    }
}
