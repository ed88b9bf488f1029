//! Exact planar area and seeded Monte Carlo volume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::property::InputBox;

use super::{polygon_area, vertices_2d, HalfspacePolytope};

pub const DEFAULT_SAMPLES: usize = 100_000;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMethod {
    Exact2D,
    MonteCarlo { samples: usize, seed: u64 },
}

impl VolumeMethod {
    pub fn monte_carlo(seed: u64) -> Self {
        VolumeMethod::MonteCarlo {
            samples: DEFAULT_SAMPLES,
            seed,
        }
    }
}

/// Volume of `poly ∩ within`.
pub fn volume(poly: &HalfspacePolytope, method: VolumeMethod, within: &InputBox) -> Result<f64> {
    volume_of_union(std::slice::from_ref(poly), method, within)
}

/// Volume of the union of `polys` inside `within`.
///
/// `Exact2D` measures the true union: each member is clipped to `within`
/// and has the earlier members cut away before its area is added.
/// `MonteCarlo` counts samples lying in at least one member.
pub fn volume_of_union(polys: &[HalfspacePolytope], method: VolumeMethod, within: &InputBox) -> Result<f64> {
    for p in polys {
        if p.dim() != within.dim() {
            return Err(Error::DimensionMismatch {
                expected: within.dim(),
                found: p.dim(),
            });
        }
    }
    match method {
        VolumeMethod::Exact2D => {
            if within.dim() != 2 {
                return Err(Error::NotPlanar(within.dim()));
            }
            let frame = within.to_polytope();
            let mut total = 0.0;
            let mut earlier: Vec<HalfspacePolytope> = Vec::with_capacity(polys.len());
            for p in polys {
                let clipped = p.intersect(&frame);
                let mut frags = vec![clipped.clone()];
                for q in &earlier {
                    let mut next = Vec::new();
                    for f in frags {
                        next.extend(subtract_2d(f, q)?);
                    }
                    frags = next;
                }
                for f in &frags {
                    total += area_2d(f)?;
                }
                earlier.push(clipped);
            }
            Ok(total)
        }
        VolumeMethod::MonteCarlo { samples, seed } => {
            let hits = monte_carlo_hits(polys, within, samples, seed);
            Ok(within.volume() * hits as f64 / samples.max(1) as f64)
        }
    }
}

/// Pieces below this area are dropped while cutting.
const SLIVER: f64 = 1e-14;

fn area_2d(p: &HalfspacePolytope) -> Result<f64> {
    Ok(polygon_area(&vertices_2d(p)?))
}

/// `f \ q` as convex pieces with disjoint interiors.
fn subtract_2d(f: HalfspacePolytope, q: &HalfspacePolytope) -> Result<Vec<HalfspacePolytope>> {
    if area_2d(&f)? <= SLIVER {
        return Ok(Vec::new());
    }
    if area_2d(&f.intersect(q))? <= SLIVER {
        return Ok(vec![f]);
    }
    let mut out = Vec::new();
    let mut inside = f;
    for (row, rhs) in q.rows() {
        let mut piece = inside.clone();
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        piece.push(&neg, -rhs);
        if area_2d(&piece)? > SLIVER {
            out.push(piece);
        }
        inside.push(&row, rhs);
    }
    Ok(out)
}

/// Number of `samples` uniform points of `within` that fall in some member.
///
/// Samples are drawn in fixed-size chunks, each from its own ChaCha stream
/// of `seed`, so the count does not depend on the thread count.
pub fn monte_carlo_hits(polys: &[HalfspacePolytope], within: &InputBox, samples: usize, seed: u64) -> usize {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut x = vec![0.0; within.dim()];
            let mut hits = 0;
            for _ in 0..n {
                for (i, v) in x.iter_mut().enumerate() {
                    *v = sample_coordinate(&mut rng, within.lower[i], within.upper[i]);
                }
                if polys.iter().any(|p| p.contains(&x, 0.0)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum()
}

fn sample_coordinate(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
