use ndarray::{Array1, Array2};

use crate::bounds::{AlphaPolicy, Crown};
use crate::complete::{enumerate_patterns, sign_row, ActivationPattern, NeuronStatus};
use crate::error::{Error, Result};
use crate::geometry::{volume_of_union, HalfspacePolytope, VolumeMethod};
use crate::model::Network;
use crate::property::{InputBox, OutputPolytope};

pub const DEFAULT_PREIMAGE_CAP: usize = 1 << 16;

/// One member of a preimage: the inputs of some layer that, under the
/// statuses fixed in `pattern`, are mapped into the postcondition.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimagePolytope {
    pub polytope: HalfspacePolytope,
    /// Statuses of the layers between this polytope and the output;
    /// earlier layers stay `Unstable`.
    pub pattern: ActivationPattern,
    pub volume: Option<f64>,
}

/// Exact preimage as a union of polytopes, together with the intermediate
/// unions met on the way back from the output.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageExact {
    /// Over the network input, intersected with the analyzed box.
    pub polytopes: Vec<PreimagePolytope>,
    /// `stages[k]` lives on the input of layer `k` (so `stages[0]` equals
    /// `polytopes`).
    pub stages: Vec<Vec<PreimagePolytope>>,
    pub input: InputBox,
}

impl PreimageExact {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.polytopes.iter().any(|p| p.polytope.contains(x, tol))
    }

    pub fn union_volume(&self, method: VolumeMethod) -> Result<f64> {
        let polys: Vec<HalfspacePolytope> = self.polytopes.iter().map(|p| p.polytope.clone()).collect();
        volume_of_union(&polys, method, &self.input)
    }

    /// Fill in each member's own volume inside the box.
    pub fn compute_volumes(&mut self, method: VolumeMethod) -> Result<()> {
        for p in &mut self.polytopes {
            p.volume = Some(crate::geometry::volume(&p.polytope, method, &self.input)?);
        }
        self.stages[0] = self.polytopes.clone();
        Ok(())
    }
}

/// Pull `post` back through the network layer by layer.
///
/// The output layer maps `{A·y ≤ b}` to `{A·W·z ≤ b − A·a}`. Each ReLU
/// layer splits a polytope into one piece per activation pattern: active
/// coordinates keep their value and gain `ẑ ≥ 0`, inactive ones are
/// replaced by zero and gain `ẑ ≤ 0`. Pieces are discarded when they do not
/// meet the layer's reachable bound box (or, for the first layer, the input
/// box, which is then added to the piece). Boundary-only intersections
/// count as meeting, so lower-dimensional pieces survive.
pub fn preimage_exact(net: &Network, input: &InputBox, post: &OutputPolytope, cap: usize) -> Result<PreimageExact> {
    net.check_input(&input.lower)?;
    post.check_dim(net.output_dim())?;
    let layers = net.layers();
    let last = layers.len() - 1;
    let crown = Crown::new(net, input, &AlphaPolicy::Zero, None)?;
    let bounds = crown.bounds();
    // bound box of the input of layer k
    let domain = |k: usize| -> HalfspacePolytope {
        if k == 0 {
            return input.to_polytope();
        }
        let (lo, hi) = bounds.layer(k - 1);
        if layers[k - 1].is_relu() {
            let lo: Vec<f64> = lo.iter().map(|v| v.max(0.0)).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v.max(0.0)).collect();
            HalfspacePolytope::from_box(&lo, &hi)
        } else {
            HalfspacePolytope::from_box(lo.as_slice().expect("contiguous"), hi.as_slice().expect("contiguous"))
        }
    };

    let mut stages: Vec<Vec<PreimagePolytope>> = vec![Vec::new(); layers.len()];
    let top = pull_back(&post.a, &post.b, &layers[last].weight, &layers[last].bias);
    let mut current = Vec::new();
    if let Some(poly) = top {
        let poly = finish_stage(poly, last, &domain(last))?;
        if let Some(poly) = poly {
            current.push(PreimagePolytope {
                polytope: poly,
                pattern: ActivationPattern::unconstrained(net),
                volume: None,
            });
        }
    }
    stages[last] = current.clone();

    for k in (0..last).rev() {
        let layer = &layers[k];
        let dom = domain(k);
        let mut next = Vec::new();
        for piece in &current {
            if layer.is_relu() {
                split_layer(net, k, piece, &dom, cap, &mut next)?;
            } else if let Some(poly) = pull_back(&piece.polytope.a, &piece.polytope.b, &layer.weight, &layer.bias) {
                if let Some(poly) = finish_stage(poly, k, &dom)? {
                    next.push(PreimagePolytope {
                        polytope: poly,
                        pattern: piece.pattern.clone(),
                        volume: None,
                    });
                }
            }
            if next.len() > cap {
                return Err(Error::CapExceeded { count: next.len(), cap });
            }
        }
        stages[k] = next.clone();
        current = next;
    }
    Ok(PreimageExact {
        polytopes: current,
        stages,
        input: input.clone(),
    })
}

/// `{C·v ≤ e}` over `W·z + a` becomes `{C·W·z ≤ e − C·a}`. Rows that vanish
/// are dropped when true up to roundoff; `None` when one is false.
fn pull_back(c: &Array2<f64>, e: &Array1<f64>, w: &Array2<f64>, a: &Array1<f64>) -> Option<HalfspacePolytope> {
    let cw = c.dot(w);
    let rhs = e - &c.dot(a);
    let mut out = HalfspacePolytope::universe(w.ncols());
    for (row, r) in cw.rows().into_iter().zip(rhs.iter()) {
        if !out.push_nonconstant(&row.to_vec(), *r) {
            return None;
        }
    }
    Some(out)
}

/// Check against the stage's bound box; the first stage keeps the box rows.
fn finish_stage(poly: HalfspacePolytope, k: usize, domain: &HalfspacePolytope) -> Result<Option<HalfspacePolytope>> {
    let clipped = poly.intersect(domain);
    if !clipped.is_feasible()? {
        return Ok(None);
    }
    Ok(Some(if k == 0 { clipped } else { poly }))
}

fn split_layer(
    net: &Network,
    k: usize,
    piece: &PreimagePolytope,
    domain: &HalfspacePolytope,
    cap: usize,
    out: &mut Vec<PreimagePolytope>,
) -> Result<()> {
    let layer = &net.layers()[k];
    let n = layer.output_dim();
    let mut signs = HalfspacePolytope::universe(layer.input_dim());
    let mut status = vec![NeuronStatus::Unstable; n];
    descend(net, k, piece, domain, cap, 0, &mut status, &mut signs, out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    net: &Network,
    k: usize,
    piece: &PreimagePolytope,
    domain: &HalfspacePolytope,
    cap: usize,
    j: usize,
    status: &mut Vec<NeuronStatus>,
    signs: &mut HalfspacePolytope,
    out: &mut Vec<PreimagePolytope>,
) -> Result<()> {
    let layer = &net.layers()[k];
    if j == layer.output_dim() {
        // substitute z = diag(s)·ẑ, then pull back through the affine map
        let mut masked = piece.polytope.a.clone();
        for (col, s) in status.iter().enumerate() {
            if *s == NeuronStatus::Inactive {
                masked.column_mut(col).fill(0.0);
            }
        }
        let Some(pulled) = pull_back(&masked, &piece.polytope.b, &layer.weight, &layer.bias) else {
            return Ok(());
        };
        let poly = pulled.intersect(signs);
        if let Some(poly) = finish_stage(poly, k, domain)? {
            let mut pattern = piece.pattern.clone();
            for (i, s) in status.iter().enumerate() {
                pattern.set(k, i, *s);
            }
            out.push(PreimagePolytope {
                polytope: poly,
                pattern,
                volume: None,
            });
            if out.len() > cap {
                return Err(Error::CapExceeded { count: out.len(), cap });
            }
        }
        return Ok(());
    }
    let row = layer.weight.row(j).to_vec();
    for active in [true, false] {
        let (a, b) = sign_row(&row, layer.bias[j], active);
        let mut child = signs.clone();
        child.push(&a, b);
        if !child.intersect(domain).is_feasible()? {
            continue;
        }
        status[j] = if active {
            NeuronStatus::Active
        } else {
            NeuronStatus::Inactive
        };
        descend(net, k, piece, domain, cap, j + 1, status, &mut child, out)?;
    }
    status[j] = NeuronStatus::Unstable;
    Ok(())
}

/// A piece of the input box on which the network is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegion {
    pub polytope: HalfspacePolytope,
    pub pattern: ActivationPattern,
    /// `f(x) = weight·x + bias` on the region.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearRegion {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.weight.dot(&Array1::from(x.to_vec())) + &self.bias).to_vec()
    }
}

/// Partition `input` into linear regions with their affine maps. Intended
/// for inputs of dimension at most 3; `cap` bounds the number of unstable
/// neurons.
pub fn linear_regions(net: &Network, input: &InputBox, cap: usize) -> Result<Vec<LinearRegion>> {
    Ok(enumerate_patterns(net, input, cap)?
        .into_iter()
        .map(|(pattern, polytope)| {
            let (weight, bias) = net.linearize(&pattern.active_mask()).pop().expect("at least one layer");
            LinearRegion {
                polytope,
                pattern,
                weight,
                bias,
            }
        })
        .collect())
}
