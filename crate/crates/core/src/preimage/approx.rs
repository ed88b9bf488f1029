use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{AlphaPolicy, Crown, ReluRelaxation};
use crate::error::{Error, Result};
use crate::geometry::{volume, HalfspacePolytope, VolumeMethod, DEFAULT_SAMPLES};
use crate::model::Network;
use crate::property::{InputBox, OutputPolytope};

/// How coverage volumes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimator {
    Exact2D,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxConfig {
    pub target_coverage: f64,
    pub max_iters: usize,
    /// Tune lower relaxation slopes per subdomain before accepting its
    /// polytope.
    pub alpha_opt: bool,
    pub seed: u64,
    /// Monte Carlo samples per volume estimate (inputs above 2-D).
    pub samples: usize,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            target_coverage: 0.9,
            max_iters: 100,
            alpha_opt: false,
            seed: 0,
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// A cell of the input partition with its certified preimage piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub domain: InputBox,
    /// Subset of `domain` mapped into the postcondition.
    pub polytope: HalfspacePolytope,
    pub volume: f64,
    /// Splits leading here, e.g. `"0-|1+"` (lower half on x0, then upper
    /// half on x1); empty for the root.
    pub path: String,
}

impl Subdomain {
    pub fn uncovered(&self) -> f64 {
        (self.domain.volume() - self.volume).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRecord {
    pub dim: usize,
    pub at: f64,
    pub gain: f64,
}

/// Under-approximation of a preimage by disjoint polytopes, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageApprox {
    pub subdomains: Vec<Subdomain>,
    pub splits: Vec<SplitRecord>,
    pub coverage: f64,
    /// Coverage before the first split and after every split.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub estimator: Estimator,
    pub input: InputBox,
}

impl PreimageApprox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.subdomains.iter().any(|s| s.polytope.contains(x, 0.0))
    }

    pub fn polytopes(&self) -> impl Iterator<Item = &HalfspacePolytope> {
        self.subdomains.iter().map(|s| &s.polytope)
    }

    /// Half-width of a 99% confidence interval on `coverage`; zero for
    /// exact volumes. Cells are independent strata.
    pub fn confidence_margin(&self) -> f64 {
        match self.estimator {
            Estimator::Exact2D => 0.0,
            Estimator::MonteCarlo { samples } => {
                let total = self.input.volume();
                let var: f64 = self
                    .subdomains
                    .iter()
                    .map(|s| {
                        let w = s.domain.volume() / total;
                        let c = s.volume / s.domain.volume();
                        w * w * c * (1.0 - c) / samples as f64
                    })
                    .sum();
                Z99 * var.sqrt()
            }
        }
    }
}

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

const SOFT_TEMPERATURE: f64 = 0.01;
const PGD_STEPS: usize = 20;
const PGD_STEP: f64 = 0.1;
const FD_STEP: f64 = 1e-3;
const SURROGATE_SAMPLES: usize = 256;

/// Anytime under-approximation of the preimage of `post` inside `input`.
///
/// Each cell gets the polytope `{x ∈ cell : g_r(x) ≤ b_r for all r}` where
/// `g_r` is the linear upper bound of `a_r·f` on the cell. The cell with the
/// most uncovered volume is split at the midpoint of the coordinate whose
/// split covers the most; a child keeps its parent's piece when that is
/// larger than its own, so coverage never decreases.
pub fn preimage_under_approx(
    net: &Network,
    input: &InputBox,
    post: &OutputPolytope,
    config: &ApproxConfig,
) -> Result<PreimageApprox> {
    net.check_input(&input.lower)?;
    post.check_dim(net.output_dim())?;
    if !(config.target_coverage >= 0.0 && config.target_coverage <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target coverage {} not in [0, 1]",
            config.target_coverage
        )));
    }
    if input.volume() <= 0.0 {
        return Err(Error::InvalidSpec("input box has zero volume".into()));
    }
    let estimator = if input.dim() == 2 {
        Estimator::Exact2D
    } else {
        Estimator::MonteCarlo {
            samples: config.samples,
        }
    };
    let ctx = Ctx {
        net,
        post,
        config,
        estimator,
    };
    let total = input.volume();
    let root = ctx.approximate(input, String::new(), None, 0)?;
    let mut cells = vec![root];
    let coverage = |cells: &[Subdomain]| cells.iter().map(|c| c.volume).sum::<f64>() / total;
    let mut history = vec![coverage(&cells)];
    let mut splits = Vec::new();
    let mut created = 1u64;

    while *history.last().expect("nonempty") < config.target_coverage && splits.len() < config.max_iters {
        let (idx, worst) =
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.uncovered()))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if worst <= 0.0 {
            break;
        }
        let parent = cells[idx].clone();
        let candidates: Vec<(usize, Subdomain, Subdomain)> = (0..input.dim())
            .into_par_iter()
            .filter(|&d| parent.domain.upper[d] > parent.domain.lower[d])
            .map(|d| {
                let (lo, hi) = parent.domain.bisect(d);
                let seed_base = created + 2 * d as u64;
                let left = ctx.approximate(&lo, format!("{}{d}-", sep(&parent.path)), Some(&parent), seed_base)?;
                let right = ctx.approximate(&hi, format!("{}{d}+", sep(&parent.path)), Some(&parent), seed_base + 1)?;
                Ok((d, left, right))
            })
            .collect::<Result<_>>()?;
        created += 2 * input.dim() as u64;
        let Some((dim, left, right)) =
            candidates
                .into_iter()
                .fold(None::<(usize, Subdomain, Subdomain)>, |best, cand| match best {
                    Some(b) if b.1.volume + b.2.volume >= cand.1.volume + cand.2.volume => Some(b),
                    _ => Some(cand),
                })
        else {
            break;
        };
        splits.push(SplitRecord {
            dim,
            at: left.domain.upper[dim],
            gain: (left.volume + right.volume - parent.volume) / total,
        });
        cells.splice(idx..=idx, [left, right]);
        history.push(coverage(&cells).max(*history.last().expect("nonempty")));
    }
    Ok(PreimageApprox {
        coverage: *history.last().expect("nonempty"),
        iterations: splits.len(),
        subdomains: cells,
        splits,
        history,
        estimator,
        input: input.clone(),
    })
}

fn sep(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!("{path}|")
    }
}

struct Ctx<'a> {
    net: &'a Network,
    post: &'a OutputPolytope,
    config: &'a ApproxConfig,
    estimator: Estimator,
}

impl Ctx<'_> {
    fn method(&self, stream: u64) -> VolumeMethod {
        match self.estimator {
            Estimator::Exact2D => VolumeMethod::Exact2D,
            Estimator::MonteCarlo { samples } => VolumeMethod::MonteCarlo {
                samples,
                seed: self.config.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            },
        }
    }

    fn approximate(
        &self,
        domain: &InputBox,
        path: String,
        parent: Option<&Subdomain>,
        stream: u64,
    ) -> Result<Subdomain> {
        let method = self.method(stream);
        let mut polytope = cell_polytope(self.net, domain, self.post, &AlphaPolicy::Adaptive)?;
        let mut vol = volume(&polytope, method, domain)?;
        if self.config.alpha_opt && self.post.num_rows() > 0 {
            let tuned = optimize_alpha(self.net, domain, self.post, self.config.seed ^ stream)?;
            let candidate = cell_polytope(self.net, domain, self.post, &tuned)?;
            let v = volume(&candidate, method, domain)?;
            if v > vol {
                polytope = candidate;
                vol = v;
            }
        }
        if let Some(p) = parent {
            let inherited = p.polytope.intersect(&domain.to_polytope());
            let v = volume(&inherited, method, domain)?;
            if v > vol {
                polytope = inherited;
                vol = v;
            }
        }
        Ok(Subdomain {
            domain: domain.clone(),
            polytope,
            volume: vol,
            path,
        })
    }
}

/// `{x ∈ domain : g_r(x) ≤ b_r}` with `g_r` the linear upper bound of
/// `a_r·f(x)` over `domain`.
pub fn cell_polytope(
    net: &Network,
    domain: &InputBox,
    post: &OutputPolytope,
    policy: &AlphaPolicy,
) -> Result<HalfspacePolytope> {
    let mut poly = domain.to_polytope();
    if post.num_rows() == 0 {
        return Ok(poly);
    }
    let crown = Crown::new(net, domain, policy, None)?;
    for r in 0..post.num_rows() {
        let (a, b) = post.row(r);
        let g = crown.row_upper_affine(a.as_slice().expect("contiguous"));
        let coeffs = g.coeffs.as_slice().expect("contiguous");
        if !poly.push_nonconstant(coeffs, b - g.constant) {
            // empty cell; keep the failing row so the polytope says so
            poly.push(coeffs, b - g.constant);
        }
    }
    Ok(poly)
}

/// Slopes of the cell's unstable neurons tuned by projected gradient ascent
/// on a smooth volume surrogate: the mean over fixed samples of
/// `σ(−LSE_T(slacks)/T)`, where the slacks are `g_r(x) − b_r`.
pub fn optimize_alpha(net: &Network, domain: &InputBox, post: &OutputPolytope, seed: u64) -> Result<AlphaPolicy> {
    let start = Crown::new(net, domain, &AlphaPolicy::Adaptive, None)?;
    let mut alpha: Vec<Vec<f64>> = start
        .relaxations()
        .iter()
        .map(|layer| layer.iter().map(|r| r.alpha).collect())
        .collect();
    let free: Vec<(usize, usize)> = start
        .relaxations()
        .iter()
        .enumerate()
        .flat_map(|(k, layer)| {
            layer
                .iter()
                .enumerate()
                .filter(|(_, r)| **r != ReluRelaxation::IDENTITY && **r != ReluRelaxation::ZERO)
                .map(move |(j, _)| (k, j))
        })
        .collect();
    if free.is_empty() {
        return Ok(AlphaPolicy::Fixed(alpha));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..SURROGATE_SAMPLES)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect()
        })
        .collect();
    let surrogate = |alpha: &Vec<Vec<f64>>| -> Result<f64> {
        let crown = Crown::new(net, domain, &AlphaPolicy::Fixed(alpha.clone()), None)?;
        let bounds: Vec<_> = (0..post.num_rows())
            .map(|r| {
                let (a, b) = post.row(r);
                (crown.row_upper_affine(a.as_slice().expect("contiguous")), b)
            })
            .collect();
        let mut acc = 0.0;
        for x in &samples {
            let slacks: Vec<f64> = bounds.iter().map(|(g, b)| g.eval(x) - b).collect();
            let m = slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + SOFT_TEMPERATURE
                * slacks
                    .iter()
                    .map(|s| ((s - m) / SOFT_TEMPERATURE).exp())
                    .sum::<f64>()
                    .ln();
            acc += 1.0 / (1.0 + (lse / SOFT_TEMPERATURE).exp());
        }
        Ok(acc / samples.len() as f64)
    };
    for _ in 0..PGD_STEPS {
        let mut grad = Vec::with_capacity(free.len());
        for &(k, j) in &free {
            let orig = alpha[k][j];
            alpha[k][j] = (orig + FD_STEP).min(1.0);
            let hi_val = alpha[k][j];
            let up = surrogate(&alpha)?;
            alpha[k][j] = (orig - FD_STEP).max(0.0);
            let lo_val = alpha[k][j];
            let down = surrogate(&alpha)?;
            alpha[k][j] = orig;
            grad.push(if hi_val > lo_val {
                (up - down) / (hi_val - lo_val)
            } else {
                0.0
            });
        }
        for (&(k, j), g) in free.iter().zip(grad) {
            alpha[k][j] = (alpha[k][j] + PGD_STEP * g).clamp(0.0, 1.0);
        }
    }
    Ok(AlphaPolicy::Fixed(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::running_example;
    use crate::property::satisfies;

    fn square() -> InputBox {
        InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn y1_ge_y2() -> OutputPolytope {
        OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0]).unwrap()
    }

    #[test]
    fn one_split_reaches_target() {
        let net = running_example();
        let r = preimage_under_approx(&net, &square(), &y1_ge_y2(), &ApproxConfig::default()).unwrap();
        assert_eq!(r.iterations, 1, "{:?}", r.history);
        assert_eq!(r.splits[0].dim, 0);
        assert_eq!(r.subdomains.len(), 2);
        assert!(r.coverage >= 0.9, "{}", r.coverage);
    }

    #[test]
    fn whole_output_space() {
        let net = running_example();
        let r = preimage_under_approx(
            &net,
            &square(),
            &OutputPolytope::everything(2),
            &ApproxConfig::default(),
        )
        .unwrap();
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.subdomains[0].polytope, square().to_polytope());
    }

    #[test]
    fn infeasible_post() {
        let net = running_example();
        // y1 ≤ y1 − 1
        let post = OutputPolytope::from_rows(&[vec![0.0, 0.0]], &[-1.0]).unwrap();
        let cfg = ApproxConfig {
            max_iters: 5,
            ..ApproxConfig::default()
        };
        let r = preimage_under_approx(&net, &square(), &post, &cfg).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert!(r.history.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn coverage_is_monotone_and_sound() {
        let net = running_example();
        let post = OutputPolytope::from_rows(&[vec![1.0, 0.0]], &[1.5]).unwrap();
        let cfg = ApproxConfig {
            target_coverage: 1.0,
            max_iters: 12,
            ..ApproxConfig::default()
        };
        let r = preimage_under_approx(&net, &square(), &post, &cfg).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut inside = 0;
        for _ in 0..20_000 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if r.contains(&x) {
                inside += 1;
                assert!(satisfies(&net.forward(&x).unwrap(), &post).unwrap());
            }
        }
        assert!(inside > 0);
    }

    #[test]
    fn alpha_optimization_never_hurts() {
        let net = running_example();
        let plain = preimage_under_approx(
            &net,
            &square(),
            &y1_ge_y2(),
            &ApproxConfig {
                max_iters: 0,
                ..ApproxConfig::default()
            },
        )
        .unwrap();
        let tuned = preimage_under_approx(
            &net,
            &square(),
            &y1_ge_y2(),
            &ApproxConfig {
                max_iters: 0,
                alpha_opt: true,
                ..ApproxConfig::default()
            },
        )
        .unwrap();
        assert!(tuned.coverage >= plain.coverage);
    }

    #[test]
    fn monte_carlo_in_three_dimensions() {
        use crate::model::{Activation, Layer};
        use ndarray::array;
        let net = Network::new(
            3,
            vec![
                Layer::new(
                    array![[1.0, -1.0, 0.5], [0.5, 1.0, -1.0]],
                    array![0.1, 0.0],
                    Activation::Relu,
                ),
                Layer::new(array![[1.0, -1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap();
        let bx = InputBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let post = OutputPolytope::from_rows(&[vec![1.0]], &[0.5]).unwrap();
        let cfg = ApproxConfig {
            max_iters: 4,
            samples: 20_000,
            ..ApproxConfig::default()
        };
        let a = preimage_under_approx(&net, &bx, &post, &cfg).unwrap();
        let b = preimage_under_approx(&net, &bx, &post, &cfg).unwrap();
        assert_eq!(a.coverage, b.coverage);
        assert!(matches!(a.estimator, Estimator::MonteCarlo { samples: 20_000 }));
        assert!(a.confidence_margin() > 0.0);
    }
}
