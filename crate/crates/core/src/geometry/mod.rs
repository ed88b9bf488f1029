//! Halfspace polytopes and the computations built on them.

mod lp;
mod planar;
mod volume;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub use lp::{is_feasible, lp_solve, LpResult, LpStatus, Sense, FEAS_TOL};
pub use planar::{polygon_area, vertices_2d, MERGE_TOL};
pub use volume::{monte_carlo_hits, volume, volume_of_union, VolumeMethod, DEFAULT_SAMPLES};

/// `{x : A·x ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspacePolytope {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

impl HalfspacePolytope {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("polytope has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    /// No constraints: all of `R^d`.
    pub fn universe(d: usize) -> Self {
        Self {
            a: Array2::zeros((0, d)),
            b: Array1::zeros(0),
        }
    }

    pub fn from_box(lower: &[f64], upper: &[f64]) -> Self {
        let d = lower.len();
        let mut a = Array2::zeros((2 * d, d));
        let mut b = Array1::zeros(2 * d);
        for i in 0..d {
            a[[i, i]] = 1.0;
            b[i] = upper[i];
            a[[d + i, i]] = -1.0;
            b[d + i] = -lower[i];
        }
        Self { a, b }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    /// Append `row·x ≤ rhs`.
    pub fn push(&mut self, row: &[f64], rhs: f64) {
        debug_assert_eq!(row.len(), self.dim());
        self.a
            .push_row(ndarray::ArrayView1::from(row))
            .expect("row length matches polytope dimension");
        self.b
            .append(Axis(0), ndarray::ArrayView1::from(&[rhs]))
            .expect("1-d append");
    }

    /// Like [`push`](Self::push), but a row with all coefficients zero is
    /// settled on the spot with the LP's feasibility tolerance: dropped when
    /// it holds, `false` when it cannot.
    pub fn push_nonconstant(&mut self, row: &[f64], rhs: f64) -> bool {
        if row.iter().all(|v| *v == 0.0) {
            return rhs >= -FEAS_TOL;
        }
        self.push(row, rhs);
        true
    }

    pub fn intersect(&self, other: &HalfspacePolytope) -> HalfspacePolytope {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        a.append(Axis(0), other.a.view()).expect("same dimension");
        b.append(Axis(0), other.b.view()).expect("1-d append");
        HalfspacePolytope { a, b }
    }

    /// `max_i (a_i·x − b_i)`, or `−∞` without constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let xv = ndarray::ArrayView1::from(x);
        (0..self.num_constraints())
            .map(|i| self.a.row(i).dot(&xv) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    pub fn is_feasible(&self) -> Result<bool> {
        Ok(is_feasible(self)?.is_some())
    }

    /// Rows rescaled to unit Euclidean norm; zero rows are kept unchanged.
    pub fn normalized(&self) -> HalfspacePolytope {
        let mut out = self.clone();
        for i in 0..out.num_constraints() {
            let n = out.a.row(i).dot(&out.a.row(i)).sqrt();
            if n > 0.0 {
                out.a.row_mut(i).mapv_inplace(|v| v / n);
                out.b[i] /= n;
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.num_constraints())
            .map(|i| (self.a.row(i).to_vec(), self.b[i]))
            .collect()
    }
}
