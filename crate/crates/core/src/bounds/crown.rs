use ndarray::{Array1, Array2};

use crate::complete::{ActivationPattern, NeuronStatus};
use crate::error::Result;
use crate::model::Network;
use crate::property::InputBox;

use super::interval::affine_interval;
use super::{interval_row_upper, NeuronBounds};

/// Choice of lower-relaxation slope `α ∈ [0, 1]` for unstable neurons.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum AlphaPolicy {
    /// `α = 0` everywhere.
    #[default]
    Zero,
    /// `α = 1` when `u ≥ −l`, else `0` (smaller relaxation area).
    Adaptive,
    /// Explicit slope per layer and neuron; missing entries default to `0`,
    /// values are clipped to `[0, 1]`.
    Fixed(Vec<Vec<f64>>),
}

impl AlphaPolicy {
    fn alpha(&self, layer: usize, neuron: usize, l: f64, u: f64) -> f64 {
        match self {
            AlphaPolicy::Zero => 0.0,
            AlphaPolicy::Adaptive => {
                if u >= -l {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaPolicy::Fixed(values) => values
                .get(layer)
                .and_then(|v| v.get(neuron))
                .copied()
                .unwrap_or(0.0)
                .clamp(0.0, 1.0),
        }
    }
}

/// Linear bounds `alpha·ẑ ≤ relu(ẑ) ≤ slope·ẑ + intercept`.
///
/// Stable active neurons have `alpha = slope = 1`, inactive ones all zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluRelaxation {
    pub alpha: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl ReluRelaxation {
    pub const IDENTITY: Self = Self {
        alpha: 1.0,
        slope: 1.0,
        intercept: 0.0,
    };
    pub const ZERO: Self = Self {
        alpha: 0.0,
        slope: 0.0,
        intercept: 0.0,
    };

    /// Chord upper bound and `alpha` lower bound on `[l, u]`, exact when stable.
    pub fn for_interval(l: f64, u: f64, alpha: f64) -> Self {
        if l >= 0.0 {
            Self::IDENTITY
        } else if u <= 0.0 {
            Self::ZERO
        } else {
            let slope = u / (u - l);
            Self {
                alpha,
                slope,
                intercept: -slope * l,
            }
        }
    }
}

/// An affine function `coeffs·x + constant` of the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBound {
    pub coeffs: Array1<f64>,
    pub constant: f64,
}

impl AffineBound {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.constant
    }

    pub fn max_over(&self, input: &InputBox) -> f64 {
        self.constant + interval_row_upper(&self.coeffs, &input.lower, &input.upper)
    }

    pub fn min_over(&self, input: &InputBox) -> f64 {
        let neg = self.coeffs.mapv(|v| -v);
        self.constant - interval_row_upper(&neg, &input.lower, &input.upper)
    }
}

/// `lower_a·x + lower_c ≤ f(x) ≤ upper_a·x + upper_c` over the analyzed box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBounds {
    pub lower_a: Array2<f64>,
    pub lower_c: Array1<f64>,
    pub upper_a: Array2<f64>,
    pub upper_c: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrownResult {
    pub bounds: NeuronBounds,
    pub linear: LinearBounds,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Linear bound propagation over an input box, optionally under fixed
/// neuron statuses (fixed active neurons pass their input, fixed inactive
/// ones output zero).
///
/// Pre-activation bounds of each layer come from backward substitution
/// through all earlier relaxations, intersected with interval arithmetic on
/// the previous layer's bounds.
#[derive(Debug, Clone)]
pub struct Crown<'a> {
    net: &'a Network,
    input: InputBox,
    bounds: NeuronBounds,
    relax: Vec<Vec<ReluRelaxation>>,
    infeasible: bool,
}

impl<'a> Crown<'a> {
    pub fn new(
        net: &'a Network,
        input: &InputBox,
        policy: &AlphaPolicy,
        pattern: Option<&ActivationPattern>,
    ) -> Result<Self> {
        net.check_input(&input.lower)?;
        let layers = net.layers();
        let mut crown = Crown {
            net,
            input: input.clone(),
            bounds: NeuronBounds {
                lower: Vec::with_capacity(layers.len()),
                upper: Vec::with_capacity(layers.len()),
            },
            relax: Vec::with_capacity(layers.len()),
            infeasible: false,
        };
        let mut post_lo = Array1::from(input.lower.clone());
        let mut post_hi = Array1::from(input.upper.clone());
        for (k, layer) in layers.iter().enumerate() {
            let (ibp_lo, ibp_hi) = affine_interval(&layer.weight, &layer.bias, &post_lo, &post_hi);
            let (mut lo, mut hi) = if k == 0 {
                (ibp_lo, ibp_hi)
            } else {
                let eye = Array2::eye(layer.output_dim());
                let low = crown.backward(k, &eye, false, None);
                let up = crown.backward(k, &eye, true, None);
                let lo = Array1::from_iter((0..layer.output_dim()).map(|j| {
                    let f = AffineBound {
                        coeffs: low.0.row(j).to_owned(),
                        constant: low.1[j],
                    };
                    f.min_over(input).max(ibp_lo[j])
                }));
                let hi = Array1::from_iter((0..layer.output_dim()).map(|j| {
                    let f = AffineBound {
                        coeffs: up.0.row(j).to_owned(),
                        constant: up.1[j],
                    };
                    f.max_over(input).min(ibp_hi[j])
                }));
                (lo, hi)
            };
            let mut relax = Vec::with_capacity(layer.output_dim());
            if layer.is_relu() {
                for j in 0..layer.output_dim() {
                    let status = pattern.map_or(NeuronStatus::Unstable, |p| p.get(k, j));
                    match status {
                        NeuronStatus::Active => {
                            if hi[j] < 0.0 {
                                crown.infeasible = true;
                            }
                            lo[j] = lo[j].max(0.0);
                            hi[j] = hi[j].max(lo[j]);
                            relax.push(ReluRelaxation::IDENTITY);
                        }
                        NeuronStatus::Inactive => {
                            if lo[j] > 0.0 {
                                crown.infeasible = true;
                            }
                            hi[j] = hi[j].min(0.0);
                            lo[j] = lo[j].min(hi[j]);
                            relax.push(ReluRelaxation::ZERO);
                        }
                        NeuronStatus::Unstable => {
                            relax.push(ReluRelaxation::for_interval(
                                lo[j],
                                hi[j],
                                policy.alpha(k, j, lo[j], hi[j]),
                            ));
                        }
                    }
                }
                post_lo = lo.mapv(|v| v.max(0.0));
                post_hi = hi.mapv(|v| v.max(0.0));
                for (j, r) in relax.iter().enumerate() {
                    if *r == ReluRelaxation::ZERO {
                        post_lo[j] = 0.0;
                        post_hi[j] = 0.0;
                    }
                }
            } else {
                relax.resize(layer.output_dim(), ReluRelaxation::IDENTITY);
                post_lo = lo.clone();
                post_hi = hi.clone();
            }
            crown.bounds.lower.push(lo);
            crown.bounds.upper.push(hi);
            crown.relax.push(relax);
        }
        Ok(crown)
    }

    /// Backward substitution of `coeffs·ẑ_k` down to the input. Returns
    /// `(A, c)` such that `A·x + c` bounds it from above (`upper`) or below.
    /// When `record` is given, it receives the coefficient on every
    /// post-activation neuron before its relaxation is applied.
    fn backward(
        &self,
        k: usize,
        coeffs: &Array2<f64>,
        upper: bool,
        mut record: Option<&mut Vec<Array2<f64>>>,
    ) -> (Array2<f64>, Array1<f64>) {
        let layers = self.net.layers();
        let mut c = coeffs.dot(&layers[k].bias);
        let mut lam = coeffs.dot(&layers[k].weight);
        for j in (0..k).rev() {
            if let Some(rec) = record.as_deref_mut() {
                rec[j] = lam.clone();
            }
            let relax = &self.relax[j];
            for (r, mut row) in lam.rows_mut().into_iter().enumerate() {
                for (n, v) in row.iter_mut().enumerate() {
                    let rl = relax[n];
                    if (*v >= 0.0) == upper {
                        c[r] += *v * rl.intercept;
                        *v *= rl.slope;
                    } else {
                        *v *= rl.alpha;
                    }
                }
            }
            c += &lam.dot(&layers[j].bias);
            lam = lam.dot(&layers[j].weight);
        }
        (lam, c)
    }

    pub fn bounds(&self) -> &NeuronBounds {
        &self.bounds
    }

    pub fn into_bounds(self) -> NeuronBounds {
        self.bounds
    }

    pub fn relaxations(&self) -> &[Vec<ReluRelaxation>] {
        &self.relax
    }

    /// A fixed status contradicts the computed bounds, so the constrained
    /// subdomain is empty.
    pub fn is_infeasible(&self) -> bool {
        self.infeasible
    }

    pub fn linear_bounds(&self) -> LinearBounds {
        let last = self.net.num_layers() - 1;
        let eye = Array2::eye(self.net.output_dim());
        let (lower_a, lower_c) = self.backward(last, &eye, false, None);
        let (upper_a, upper_c) = self.backward(last, &eye, true, None);
        LinearBounds {
            lower_a,
            lower_c,
            upper_a,
            upper_c,
        }
    }

    pub fn output_interval(&self) -> (Vec<f64>, Vec<f64>) {
        self.bounds.output()
    }

    fn row_backward(&self, a: &[f64], upper: bool) -> AffineBound {
        let last = self.net.num_layers() - 1;
        let coeffs = Array2::from_shape_vec((1, a.len()), a.to_vec()).expect("row vector");
        let (m, c) = self.backward(last, &coeffs, upper, None);
        AffineBound {
            coeffs: m.row(0).to_owned(),
            constant: c[0],
        }
    }

    /// Affine upper bound of `a·f(x)` valid on the box.
    pub fn row_upper_affine(&self, a: &[f64]) -> AffineBound {
        self.row_backward(a, true)
    }

    /// Affine lower bound of `a·f(x)` valid on the box.
    pub fn row_lower_affine(&self, a: &[f64]) -> AffineBound {
        self.row_backward(a, false)
    }

    /// Certified upper bound of `a·f(x)` over the box.
    pub fn row_upper(&self, a: &[f64]) -> f64 {
        let (lo, hi) = self.output_interval();
        let by_linear = self.row_upper_affine(a).max_over(&self.input);
        by_linear.min(interval_row_upper(&Array1::from(a.to_vec()), &lo, &hi))
    }

    /// Coefficient of every post-activation neuron in the backward pass
    /// that bounds `a·f(x)` from above (one vector per layer; the output
    /// layer's entry is `a` itself).
    pub fn row_neuron_coefficients(&self, a: &[f64]) -> Vec<Vec<f64>> {
        let last = self.net.num_layers() - 1;
        let coeffs = Array2::from_shape_vec((1, a.len()), a.to_vec()).expect("row vector");
        let mut rec: Vec<Array2<f64>> = vec![Array2::zeros((1, 0)); self.net.num_layers()];
        self.backward(last, &coeffs, true, Some(&mut rec));
        let mut out: Vec<Vec<f64>> = rec.into_iter().map(|m| m.row(0).to_vec()).collect();
        out[last] = a.to_vec();
        out
    }

    pub fn input(&self) -> &InputBox {
        &self.input
    }
}

/// Bound propagation over `input` with the given lower-slope policy.
pub fn crown_propagate(net: &Network, input: &InputBox, policy: &AlphaPolicy) -> Result<CrownResult> {
    let crown = Crown::new(net, input, policy, None)?;
    let linear = crown.linear_bounds();
    let (lower, upper) = crown.output_interval();
    Ok(CrownResult {
        bounds: crown.into_bounds(),
        linear,
        lower,
        upper,
    })
}
