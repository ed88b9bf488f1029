//! Vertex enumeration and area for planar polygons.

use crate::error::{Error, Result};

use super::{lp_solve, HalfspacePolytope, LpStatus, Sense};

/// Points closer than this are merged into one vertex.
pub const MERGE_TOL: f64 = 1e-9;

/// Counterclockwise vertex cycle of a bounded 2-D polytope.
///
/// Pairwise line intersections are filtered by feasibility; collinear and
/// duplicate vertices are merged. Empty polytopes yield an empty list and
/// degenerate ones a point or a segment.
pub fn vertices_2d(poly: &HalfspacePolytope) -> Result<Vec<[f64; 2]>> {
    if poly.dim() != 2 {
        return Err(Error::NotPlanar(poly.dim()));
    }
    if !poly.is_feasible()? {
        return Ok(Vec::new());
    }
    for dir in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
        if lp_solve(poly, &dir, Sense::Max)?.status == LpStatus::Unbounded {
            return Err(Error::Unbounded);
        }
    }
    let p = poly.normalized();
    let rows = p.rows();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a1, b1) = (&rows[i].0, rows[i].1);
            let (a2, b2) = (&rows[j].0, rows[j].1);
            let det = a1[0] * a2[1] - a1[1] * a2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (b1 * a2[1] - b2 * a1[1]) / det;
            let y = (a1[0] * b2 - a2[0] * b1) / det;
            let scale = 1.0 + x.abs().max(y.abs());
            if p.max_violation(&[x, y]) <= 1e-9 * scale
                && !pts
                    .iter()
                    .any(|q| (q[0] - x).abs() <= MERGE_TOL * scale && (q[1] - y).abs() <= MERGE_TOL * scale)
            {
                pts.push([x, y]);
            }
        }
    }
    if pts.is_empty() {
        // Feasible but no clean intersection survived the filter (e.g. a
        // sliver thinner than the tolerance): fall back to the LP witness.
        return Ok(super::is_feasible(poly)?
            .map(|w| vec![[w[0], w[1]]])
            .unwrap_or_default());
    }
    Ok(convex_cycle(pts))
}

/// Sort points counterclockwise and drop collinear interior points.
fn convex_cycle(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if pts.len() <= 2 {
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        return pts;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.partial_cmp(&tb).expect("finite angles")
    });
    // Remove collinear middle points until stable.
    loop {
        let m = pts.len();
        if m <= 2 {
            break;
        }
        let mut removed = false;
        for i in 0..m {
            let a = pts[(i + m - 1) % m];
            let b = pts[i];
            let c = pts[(i + 1) % m];
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let scale = 1.0 + ((c[0] - a[0]).abs() + (c[1] - a[1]).abs()) * ((b[0] - a[0]).abs() + (b[1] - a[1]).abs());
            if cross.abs() <= MERGE_TOL * scale {
                pts.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    // Rotate so the cycle starts at the lowest, then leftmost, vertex.
    if let Some(start) = (0..pts.len()).min_by(|&i, &j| {
        (pts[i][1], pts[i][0])
            .partial_cmp(&(pts[j][1], pts[j][0]))
            .expect("finite")
    }) {
        pts.rotate_left(start);
    }
    pts
}

/// Shoelace area of a vertex cycle (absolute value).
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..vertices.len() {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice.abs()
}
