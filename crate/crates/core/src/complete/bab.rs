use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{AlphaPolicy, Crown, ReluRelaxation};
use crate::error::Result;
use crate::geometry::{lp_solve, HalfspacePolytope, LpStatus, Sense};
use crate::model::Network;
use crate::property::{InputBox, OutputPolytope};
use crate::VERDICT_GUARD;

use super::{sign_row, ActivationPattern, NeuronStatus};

pub const DEFAULT_MAX_NODES: usize = 200_000;

/// Limits on the search. Node budgets give thread-independent results;
/// a timeout does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_nodes: Option<usize>,
    pub timeout: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_nodes: Some(DEFAULT_MAX_NODES),
            timeout: None,
        }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Self {
            max_nodes: None,
            timeout: None,
        }
    }

    pub fn nodes(max_nodes: usize) -> Self {
        Self {
            max_nodes: Some(max_nodes),
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BabConfig {
    pub budget: Budget,
    /// Lower-slope policy for the per-node bound propagation.
    pub alpha: AlphaPolicy,
    /// Random box samples tried at every node.
    pub samples_per_node: usize,
    pub seed: u64,
    /// The node LP runs when the certified bound is within this fraction of
    /// the node's bound range from the threshold.
    pub lp_gap: f64,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self {
            budget: Budget::default(),
            alpha: AlphaPolicy::Adaptive,
            samples_per_node: 64,
            seed: 0,
            lp_gap: 0.1,
        }
    }
}

impl BabConfig {
    pub fn with_budget(budget: Budget) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerificationStatus {
    Verified,
    Falsified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BabStats {
    /// Subproblems bounded, root included.
    pub nodes: usize,
    pub branches: usize,
    #[serde(serialize_with = "seconds")]
    pub elapsed: Duration,
    /// Certified upper bound on `max_r (a_r·f(x) − b_r)` over the box when
    /// the search stopped (`-inf` if every subproblem was infeasible).
    pub bound: f64,
}

fn seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationVerdict {
    pub status: VerificationStatus,
    pub witness: Option<Vec<f64>>,
    pub stats: BabStats,
}

/// Decide whether every `x` in `input` satisfies `post`.
///
/// Rows of `post` are handled one after another, each by its own
/// branch-and-bound tree over ReLU splits. A node is closed when its
/// certified bound reaches the threshold, when its fixed statuses are
/// contradictory, or when it is fully fixed and its exact LP proves the row.
pub fn verify_complete(
    net: &Network,
    input: &InputBox,
    post: &OutputPolytope,
    config: &BabConfig,
) -> Result<VerificationVerdict> {
    net.check_input(&input.lower)?;
    post.check_dim(net.output_dim())?;
    let start = Instant::now();
    let mut stats = BabStats {
        nodes: 0,
        branches: 0,
        elapsed: Duration::ZERO,
        bound: f64::NEG_INFINITY,
    };
    let finish = |status, witness, mut stats: BabStats| {
        stats.elapsed = start.elapsed();
        Ok(VerificationVerdict { status, witness, stats })
    };

    // cheap global search first
    let mut probes = vec![input.center()];
    probes.extend(input.corners(12).unwrap_or_default());
    for x in probes {
        if violates(net, post, &x)? {
            return finish(VerificationStatus::Falsified, Some(x), stats);
        }
    }

    let mut unknown = false;
    for r in 0..post.num_rows() {
        let (a, b) = post.row(r);
        let search = RowSearch {
            net,
            input,
            post,
            a: a.to_vec(),
            b,
            config,
        };
        match search.run(&mut stats, start)? {
            RowOutcome::Proved(bound) => stats.bound = stats.bound.max(bound),
            RowOutcome::Falsified(x) => return finish(VerificationStatus::Falsified, Some(x), stats),
            RowOutcome::Open(bound) => {
                stats.bound = stats.bound.max(bound);
                unknown = true;
            }
        }
    }
    let status = if unknown {
        VerificationStatus::Unknown
    } else {
        VerificationStatus::Verified
    };
    finish(status, None, stats)
}

fn violates(net: &Network, post: &OutputPolytope, x: &[f64]) -> Result<bool> {
    Ok(post.violation(&net.forward(x)?) > VERDICT_GUARD)
}

enum RowOutcome {
    Proved(f64),
    Falsified(Vec<f64>),
    Open(f64),
}

enum NodeOutcome {
    Closed(f64),
    Falsified(Vec<f64>),
    /// Fully fixed, exact LP above the threshold, yet its witness does not
    /// violate under forward evaluation.
    Unresolved(f64),
    Open {
        bound: f64,
        pattern: ActivationPattern,
        split: (usize, usize),
    },
}

struct QueueEntry {
    bound: f64,
    id: usize,
    pattern: ActivationPattern,
    split: (usize, usize),
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // worst bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct RowSearch<'a> {
    net: &'a Network,
    input: &'a InputBox,
    post: &'a OutputPolytope,
    a: Vec<f64>,
    b: f64,
    config: &'a BabConfig,
}

impl RowSearch<'_> {
    fn run(&self, stats: &mut BabStats, start: Instant) -> Result<RowOutcome> {
        let mut heap = BinaryHeap::new();
        let mut next_id = 0usize;
        let mut closed_bound = f64::NEG_INFINITY;
        let mut unresolved = false;

        let root = self.evaluate(&ActivationPattern::unconstrained(self.net), next_id)?;
        next_id += 1;
        stats.nodes += 1;
        let mut pending = vec![(root, 0usize)];

        loop {
            for (outcome, id) in pending.drain(..) {
                match outcome {
                    NodeOutcome::Closed(bound) => closed_bound = closed_bound.max(bound),
                    NodeOutcome::Falsified(x) => return Ok(RowOutcome::Falsified(x)),
                    NodeOutcome::Unresolved(bound) => {
                        unresolved = true;
                        closed_bound = closed_bound.max(bound);
                    }
                    NodeOutcome::Open { bound, pattern, split } => heap.push(QueueEntry {
                        bound,
                        id,
                        pattern,
                        split,
                    }),
                }
            }
            let Some(top) = heap.peek() else { break };
            let open_bound = top.bound;
            let out_of_nodes = self.config.budget.max_nodes.is_some_and(|m| stats.nodes + 2 > m);
            let out_of_time = self.config.budget.timeout.is_some_and(|t| start.elapsed() >= t);
            if out_of_nodes || out_of_time {
                return Ok(RowOutcome::Open(closed_bound.max(open_bound)));
            }
            let node = heap.pop().expect("peeked");
            let (layer, neuron) = node.split;
            let on = node.pattern.with(layer, neuron, NeuronStatus::Active);
            let off = node.pattern.with(layer, neuron, NeuronStatus::Inactive);
            let (id_on, id_off) = (next_id, next_id + 1);
            next_id += 2;
            let (r_on, r_off) = rayon::join(|| self.evaluate(&on, id_on), || self.evaluate(&off, id_off));
            stats.nodes += 2;
            stats.branches += 1;
            pending.push((r_on?, id_on));
            pending.push((r_off?, id_off));
        }
        if unresolved {
            Ok(RowOutcome::Open(closed_bound))
        } else {
            Ok(RowOutcome::Proved(closed_bound))
        }
    }

    fn violation_witness(&self, x: Vec<f64>) -> Result<Option<Vec<f64>>> {
        let x: Vec<f64> = x
            .iter()
            .zip(self.input.lower.iter().zip(&self.input.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect();
        Ok(violates(self.net, self.post, &x)?.then_some(x))
    }

    fn evaluate(&self, pattern: &ActivationPattern, id: usize) -> Result<NodeOutcome> {
        let crown = Crown::new(self.net, self.input, &self.config.alpha, Some(pattern))?;
        if crown.is_infeasible() {
            return Ok(NodeOutcome::Closed(f64::NEG_INFINITY));
        }
        let mut bound = crown.row_upper(&self.a) - self.b;
        if bound <= VERDICT_GUARD {
            return Ok(NodeOutcome::Closed(bound));
        }

        let upper_fn = crown.row_upper_affine(&self.a);
        let lower_fn = crown.row_lower_affine(&self.a);
        let mut candidates = vec![
            maximizing_corner(&upper_fn.coeffs, self.input),
            maximizing_corner(&lower_fn.coeffs, self.input),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(id as u64);
        for _ in 0..self.config.samples_per_node {
            candidates.push(
                self.input
                    .lower
                    .iter()
                    .zip(&self.input.upper)
                    .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                    .collect(),
            );
        }
        for x in candidates {
            if let Some(w) = self.violation_witness(x)? {
                return Ok(NodeOutcome::Falsified(w));
            }
        }

        let refined = pattern.refined_by(self.net, crown.bounds());
        if refined.is_fully_fixed() {
            return match leaf_lp(self.net, self.input, &refined, &self.a)? {
                None => Ok(NodeOutcome::Closed(f64::NEG_INFINITY)),
                Some((opt, _)) if opt - self.b <= VERDICT_GUARD => Ok(NodeOutcome::Closed(opt - self.b)),
                Some((opt, x)) => Ok(match self.violation_witness(x)? {
                    Some(w) => NodeOutcome::Falsified(w),
                    None => NodeOutcome::Unresolved(opt - self.b),
                }),
            };
        }

        let lower = lower_fn.min_over(self.input) - self.b;
        if bound <= self.config.lp_gap * (bound - lower) || lower > VERDICT_GUARD {
            match triangle_lp(self.net, &crown, &self.a)? {
                None => return Ok(NodeOutcome::Closed(f64::NEG_INFINITY)),
                Some((opt, x)) => {
                    bound = bound.min(opt - self.b);
                    if bound <= VERDICT_GUARD {
                        return Ok(NodeOutcome::Closed(bound));
                    }
                    if let Some(w) = self.violation_witness(x)? {
                        return Ok(NodeOutcome::Falsified(w));
                    }
                }
            }
        }

        let split = choose_split(&crown, &self.a).expect("not fully fixed implies an unstable neuron");
        Ok(NodeOutcome::Open {
            bound,
            pattern: refined,
            split,
        })
    }
}

fn maximizing_corner(coeffs: &Array1<f64>, input: &InputBox) -> Vec<f64> {
    coeffs
        .iter()
        .zip(input.lower.iter().zip(&input.upper))
        .map(|(c, (lo, hi))| if *c >= 0.0 { *hi } else { *lo })
        .collect()
}

/// Estimated bound improvement from splitting `(layer, neuron)` in the
/// subproblem analyzed by `crown`: `|λ| · |u·l/(u − l)|`, where `λ` is the
/// neuron's coefficient in the backward pass bounding `a·f(x)` from above.
/// Zero for stable neurons.
pub fn branch_score(crown: &Crown<'_>, a: &[f64], layer: usize, neuron: usize) -> f64 {
    let coeffs = crown.row_neuron_coefficients(a);
    score_with(crown, &coeffs, layer, neuron)
}

fn score_with(crown: &Crown<'_>, coeffs: &[Vec<f64>], layer: usize, neuron: usize) -> f64 {
    let (lo, hi) = crown.bounds().layer(layer);
    let (l, u) = (lo[neuron], hi[neuron]);
    let relax = crown.relaxations()[layer][neuron];
    if !(l < 0.0 && u > 0.0) || relax == ReluRelaxation::IDENTITY || relax == ReluRelaxation::ZERO {
        return 0.0;
    }
    coeffs[layer][neuron].abs() * (u * l / (u - l)).abs()
}

/// Highest-scoring unstable neuron; ties go to the earliest `(layer, index)`.
fn choose_split(crown: &Crown<'_>, a: &[f64]) -> Option<(usize, usize)> {
    let coeffs = crown.row_neuron_coefficients(a);
    let mut best: Option<((usize, usize), f64)> = None;
    for (k, relax) in crown.relaxations().iter().enumerate() {
        for (j, r) in relax.iter().enumerate() {
            if *r == ReluRelaxation::IDENTITY || *r == ReluRelaxation::ZERO {
                continue;
            }
            let s = score_with(crown, &coeffs, k, j);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some(((k, j), s));
            }
        }
    }
    best.map(|(n, _)| n)
}

/// Exact maximum of `a·f(x)` over the inputs of `input` realizing a fully
/// fixed pattern. `None` when that set is empty.
fn leaf_lp(net: &Network, input: &InputBox, pattern: &ActivationPattern, a: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let maps = net.linearize(&pattern.active_mask());
    let mut poly = input.to_polytope();
    for (k, j) in net.relu_neurons() {
        let (m, c) = &maps[k];
        let (row, rhs) = sign_row(&m.row(j).to_vec(), c[j], pattern.get(k, j) == NeuronStatus::Active);
        poly.push(&row, rhs);
    }
    let (m, c) = maps.last().expect("at least one layer");
    let a = Array1::from(a.to_vec());
    let objective = m.t().dot(&a);
    let offset = a.dot(c);
    let res = lp_solve(&poly, objective.as_slice().expect("contiguous"), Sense::Max)?;
    Ok(match res.status {
        LpStatus::Optimal => Some((res.optimum.expect("optimal") + offset, res.witness.expect("optimal"))),
        _ => None,
    })
}

/// LP over inputs and hidden post-activations using the node's relaxations:
/// equalities for stable neurons, the triangle for unstable ones, and the
/// node's pre-activation bounds on every hidden neuron.
fn triangle_lp(net: &Network, crown: &Crown<'_>, a: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let layers = net.layers();
    let hidden = layers.len() - 1;
    let d = net.input_dim();
    let mut offsets = vec![0usize; hidden + 1];
    let mut nv = d;
    for k in 0..hidden {
        offsets[k] = nv;
        nv += layers[k].output_dim();
    }
    offsets[hidden] = nv;
    let input_var = |k: usize| if k == 0 { 0 } else { offsets[k - 1] };

    let mut poly = HalfspacePolytope::universe(nv);
    let input = crown.input();
    for i in 0..d {
        let mut row = vec![0.0; nv];
        row[i] = 1.0;
        poly.push(&row, input.upper[i]);
        row[i] = -1.0;
        poly.push(&row, -input.lower[i]);
    }
    // pre-activation ẑ_kj = e·v + c as a dense row over all variables
    let pre = |k: usize, j: usize| -> (Vec<f64>, f64) {
        let mut e = vec![0.0; nv];
        let base = input_var(k);
        for (i, w) in layers[k].weight.row(j).iter().enumerate() {
            e[base + i] = *w;
        }
        (e, layers[k].bias[j])
    };
    let combine = |z: Option<usize>, zc: f64, e: &[f64], ec: f64| -> Vec<f64> {
        let mut row: Vec<f64> = e.iter().map(|v| v * ec).collect();
        if let Some(z) = z {
            row[z] += zc;
        }
        row
    };
    for k in 0..hidden {
        let (lo, hi) = crown.bounds().layer(k);
        for j in 0..layers[k].output_dim() {
            let (e, c) = pre(k, j);
            let z = offsets[k] + j;
            // l ≤ e + c ≤ u
            poly.push(&e, hi[j] - c);
            poly.push(&combine(None, 0.0, &e, -1.0), c - lo[j]);
            let r = crown.relaxations()[k][j];
            if r == ReluRelaxation::IDENTITY {
                poly.push(&combine(Some(z), 1.0, &e, -1.0), c);
                poly.push(&combine(Some(z), -1.0, &e, 1.0), -c);
            } else if r == ReluRelaxation::ZERO {
                let mut row = vec![0.0; nv];
                row[z] = 1.0;
                poly.push(&row, 0.0);
                row[z] = -1.0;
                poly.push(&row, 0.0);
            } else {
                let mut row = vec![0.0; nv];
                row[z] = -1.0;
                poly.push(&row, 0.0);
                // z ≥ ẑ
                poly.push(&combine(Some(z), -1.0, &e, 1.0), -c);
                // z ≤ slope·ẑ + intercept
                poly.push(&combine(Some(z), 1.0, &e, -r.slope), r.slope * c + r.intercept);
            }
        }
    }
    let last = &layers[hidden];
    let base = input_var(hidden);
    let mut objective = vec![0.0; nv];
    let mut offset = 0.0;
    for (r, ar) in a.iter().enumerate() {
        offset += ar * last.bias[r];
        for (i, w) in last.weight.row(r).iter().enumerate() {
            objective[base + i] += ar * w;
        }
    }
    let res = lp_solve(&poly, &objective, Sense::Max)?;
    Ok(match res.status {
        LpStatus::Optimal => {
            let w = res.witness.expect("optimal");
            Some((res.optimum.expect("optimal") + offset, w[..d].to_vec()))
        }
        _ => None,
    })
}
