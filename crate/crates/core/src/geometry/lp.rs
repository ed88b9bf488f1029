//! Dense two-phase simplex over free variables with Bland's rule.
//!
//! Problems have the form `optimize c·x subject to A·x ≤ b` with `x` free.
//! Each free variable is split as `x = x⁺ − x⁻`, every row gets a slack and
//! rows with a negative right-hand side additionally get an artificial
//! variable for phase one.

use crate::error::{Error, Result};

use super::HalfspacePolytope;

/// Constraint satisfaction tolerance for optimal witnesses.
pub const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub optimum: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

impl LpResult {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            optimum: None,
            witness: None,
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            optimum: None,
            witness: None,
        }
    }
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    pivots: usize,
    cap: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for c in 0..width {
                    line[c] -= f * pivot_row[c];
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced costs of `cost` against the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (c, v) in rc.iter_mut().enumerate() {
                    *v -= cb * self.t[r][c];
                }
            }
        }
        rc
    }

    /// Minimize `cost` from the current basic feasible solution. Returns
    /// `Ok(false)` when unbounded.
    fn minimize(&mut self, cost: &[f64], allow_artificial: bool) -> Result<bool> {
        let limit = if allow_artificial {
            self.cols
        } else {
            self.first_artificial
        };
        loop {
            if self.pivots > self.cap {
                return Err(Error::LpIterationLimit {
                    iterations: self.pivots,
                });
            }
            let rc = self.reduced_costs(cost);
            // Bland: lowest-index improving column.
            let Some(enter) = (0..limit).find(|&c| rc[c] < -COST_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][enter];
                if a > PIVOT_TOL {
                    let ratio = self.t[r][self.cols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12 || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return Ok(false),
            }
        }
    }

    fn value_of(&self, col: usize) -> f64 {
        self.basis
            .iter()
            .position(|&b| b == col)
            .map_or(0.0, |r| self.t[r][self.cols])
    }
}

/// Optimize `objective·x` over `poly`.
pub fn lp_solve(poly: &HalfspacePolytope, objective: &[f64], sense: Sense) -> Result<LpResult> {
    let d = poly.dim();
    if objective.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: objective.len(),
        });
    }
    solve(poly, Some((objective, sense)))
}

/// Phase-one feasibility check. Returns a witness when nonempty.
pub fn is_feasible(poly: &HalfspacePolytope) -> Result<Option<Vec<f64>>> {
    Ok(solve(poly, None)?.witness)
}

fn solve(poly: &HalfspacePolytope, objective: Option<(&[f64], Sense)>) -> Result<LpResult> {
    let d = poly.dim();
    // Normalize rows; drop trivially satisfied zero rows.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(poly.num_constraints());
    for i in 0..poly.num_constraints() {
        let a = poly.a.row(i);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b = poly.b[i];
        if scale == 0.0 {
            if b < -FEAS_TOL {
                return Ok(LpResult::infeasible());
            }
            continue;
        }
        rows.push((a.iter().map(|v| v / scale).collect(), b / scale));
    }
    let k = rows.len();
    let n_struct = 2 * d;
    let n_art = rows.iter().filter(|(_, b)| *b < 0.0).count();
    let first_artificial = n_struct + k;
    let cols = first_artificial + n_art;
    let mut t = vec![vec![0.0; cols + 1]; k];
    let mut basis = vec![0; k];
    let mut art = first_artificial;
    for (i, (a, b)) in rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            t[i][j] = sign * a[j];
            t[i][d + j] = -sign * a[j];
        }
        t[i][n_struct + i] = sign;
        t[i][cols] = sign * b;
        if *b < 0.0 {
            t[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n_struct + i;
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        cols,
        first_artificial,
        pivots: 0,
        cap: 50 * (k + d).max(1),
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(first_artificial) {
            *c = 1.0;
        }
        tab.minimize(&phase1, true)?;
        let infeas: f64 = (first_artificial..cols).map(|c| tab.value_of(c)).sum();
        if infeas > FEAS_TOL {
            return Ok(LpResult::infeasible());
        }
        // Drive remaining zero-level artificials out of the basis.
        for r in 0..k {
            if tab.basis[r] >= first_artificial {
                if let Some(c) = (0..first_artificial).find(|&c| tab.t[r][c].abs() > 1e-9) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let witness_of = |tab: &Tableau| -> Vec<f64> { (0..d).map(|j| tab.value_of(j) - tab.value_of(d + j)).collect() };

    let Some((obj, sense)) = objective else {
        let w = witness_of(&tab);
        return Ok(LpResult {
            status: LpStatus::Optimal,
            optimum: Some(0.0),
            witness: Some(w),
        });
    };

    let flip = if sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; cols];
    for j in 0..d {
        cost[j] = flip * obj[j];
        cost[d + j] = -flip * obj[j];
    }
    if !tab.minimize(&cost, false)? {
        return Ok(LpResult::unbounded());
    }
    let w = witness_of(&tab);
    let optimum = w.iter().zip(obj).map(|(x, c)| x * c).sum();
    Ok(LpResult {
        status: LpStatus::Optimal,
        optimum: Some(optimum),
        witness: Some(w),
    })
}
