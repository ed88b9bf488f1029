//! Verification problems: input boxes, output polytopes, robustness and
//! quantitative specifications.

use std::io::Read;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HalfspacePolytope;

/// Tolerance of the pointwise postcondition check.
pub const SATISFY_TOL: f64 = 1e-9;

/// Axis-aligned precondition `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidSpec(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::InvalidSpec("box has no dimensions".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidSpec(format!("coordinate {i} is not finite")));
            }
            if l > u {
                return Err(Error::InvalidSpec(format!(
                    "coordinate {i} has lower {l} above upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[center − radius, center + radius]` in every coordinate.
    pub fn around(center: &[f64], radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::InvalidSpec(format!("radius {radius} is negative")));
        }
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Halve the box along `dim`.
    pub fn bisect(&self, dim: usize) -> (InputBox, InputBox) {
        let mid = 0.5 * (self.lower[dim] + self.upper[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }

    /// The box as `2·d` halfspaces (upper rows first, then lower rows).
    pub fn to_polytope(&self) -> HalfspacePolytope {
        HalfspacePolytope::from_box(&self.lower, &self.upper)
    }

    /// All `2^d` corners; `None` when `d` is too large to enumerate.
    pub fn corners(&self, max_dim: usize) -> Option<Vec<Vec<f64>>> {
        let d = self.dim();
        if d > max_dim {
            return None;
        }
        Some(
            (0..1usize << d)
                .map(|mask| {
                    (0..d)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                self.upper[i]
                            } else {
                                self.lower[i]
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Postcondition `{y : A·y ≤ b}`. Zero rows denote the whole output space.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPolytope {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

impl OutputPolytope {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidSpec(format!(
                "postcondition has {} rows but {} right-hand sides",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("postcondition has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidSpec("postcondition rows have different lengths".into()));
        }
        let flat = rows.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Self::new(a, Array1::from(b.to_vec()))
    }

    /// The whole output space of dimension `m`.
    pub fn everything(m: usize) -> Self {
        Self {
            a: Array2::zeros((0, m)),
            b: Array1::zeros(0),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn output_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn row(&self, r: usize) -> (Array1<f64>, f64) {
        (self.a.row(r).to_owned(), self.b[r])
    }

    /// Check the column count against a network's output dimension.
    pub fn check_dim(&self, m: usize) -> Result<()> {
        if self.num_rows() > 0 && self.output_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: self.output_dim(),
            });
        }
        Ok(())
    }

    /// Largest violation `max_r (a_r·y − b_r)`; `−∞` for the empty
    /// constraint set.
    pub fn violation(&self, y: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|r| self.a.row(r).iter().zip(y).map(|(a, v)| a * v).sum::<f64>() - self.b[r])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Shift every right-hand side by `−margin` (tightens for positive margins).
    pub fn tightened(&self, margin: f64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.mapv(|v| v - margin),
        }
    }

    /// Keep only row `r`.
    pub fn single_row(&self, r: usize) -> Self {
        Self {
            a: self.a.slice(ndarray::s![r..r + 1, ..]).to_owned(),
            b: Array1::from(vec![self.b[r]]),
        }
    }
}

/// `f(x) ⊨ post`: every row holds up to [`SATISFY_TOL`].
pub fn satisfies(y: &[f64], post: &OutputPolytope) -> Result<bool> {
    if post.num_rows() > 0 && y.len() != post.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: post.output_dim(),
            found: y.len(),
        });
    }
    Ok(post.violation(y) <= SATISFY_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Norm {
    #[default]
    Linf,
}

/// Local robustness of `label` on the ℓ∞ ball of radius `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSpec {
    pub center: Vec<f64>,
    pub epsilon: f64,
    #[serde(default)]
    pub norm: Norm,
    pub label: usize,
}

impl RobustnessSpec {
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "epsilon {} must be finite and ≥ 0",
                self.epsilon
            )));
        }
        if self.label >= output_dim {
            return Err(Error::InvalidSpec(format!(
                "label {} out of range for {} outputs",
                self.label, output_dim
            )));
        }
        Ok(())
    }
}

/// Box around the center plus the polytope `{y_j − y_label ≤ 0, j ≠ label}`.
pub fn robustness_to_polytope(spec: &RobustnessSpec, output_dim: usize) -> Result<(InputBox, OutputPolytope)> {
    spec.validate(output_dim)?;
    let input = InputBox::around(&spec.center, spec.epsilon)?;
    Ok((input, label_polytope(spec.label, output_dim, 0.0)))
}

/// `{y : y_j − y_label ≤ −margin for all j ≠ label}`.
pub fn label_polytope(label: usize, output_dim: usize, margin: f64) -> OutputPolytope {
    let others: Vec<usize> = (0..output_dim).filter(|&j| j != label).collect();
    let mut a = Array2::zeros((others.len(), output_dim));
    for (r, &j) in others.iter().enumerate() {
        a[[r, j]] = 1.0;
        a[[r, label]] = -1.0;
    }
    OutputPolytope {
        a,
        b: Array1::from_elem(others.len(), -margin),
    }
}

/// Quantitative property `(X, Y, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantitativeSpec {
    pub input: InputBox,
    pub output: OutputPolytope,
    pub proportion: f64,
}

impl QuantitativeSpec {
    pub fn new(input: InputBox, output: OutputPolytope, proportion: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&proportion) {
            return Err(Error::InvalidSpec(format!("proportion {proportion} not in [0, 1]")));
        }
        if input.volume() <= 0.0 {
            return Err(Error::InvalidSpec("input box has zero volume".into()));
        }
        Ok(Self {
            input,
            output,
            proportion,
        })
    }
}

#[derive(Deserialize, Serialize)]
struct PolytopeJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize, Serialize)]
struct SpecJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_box: Option<InputBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_polytope: Option<PolytopeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robustness: Option<RobustnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    proportion: Option<f64>,
}

/// A verification problem as read from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub input: InputBox,
    pub output: OutputPolytope,
    pub proportion: Option<f64>,
    /// Present when the file was written as a robustness spec.
    pub robustness: Option<RobustnessSpec>,
}

impl Problem {
    pub fn new(input: InputBox, output: OutputPolytope) -> Self {
        Self {
            input,
            output,
            proportion: None,
            robustness: None,
        }
    }

    /// Parse either the box/polytope form or the robustness form; the
    /// output dimension resolves robustness labels.
    pub fn from_json_str(source: &str, output_dim: usize) -> Result<Self> {
        let raw: SpecJson = serde_json::from_str(source)?;
        Self::from_json_model(raw, output_dim)
    }

    pub fn from_reader(source: impl Read, output_dim: usize) -> Result<Self> {
        let raw: SpecJson = serde_json::from_reader(source)?;
        Self::from_json_model(raw, output_dim)
    }

    fn from_json_model(raw: SpecJson, output_dim: usize) -> Result<Self> {
        let mut problem = match (raw.robustness, raw.input_box, raw.output_polytope) {
            (Some(rob), None, None) => {
                let (input, output) = robustness_to_polytope(&rob, output_dim)?;
                Problem {
                    input,
                    output,
                    proportion: None,
                    robustness: Some(rob),
                }
            }
            (None, Some(bx), Some(poly)) => {
                let input = InputBox::new(bx.lower, bx.upper)?;
                let output = if poly.a.is_empty() {
                    if !poly.b.is_empty() {
                        return Err(Error::InvalidSpec("empty A with non-empty b".into()));
                    }
                    OutputPolytope::everything(output_dim)
                } else {
                    OutputPolytope::from_rows(&poly.a, &poly.b)?
                };
                output.check_dim(output_dim)?;
                Problem::new(input, output)
            }
            _ => {
                return Err(Error::InvalidSpec(
                    "expected either `robustness` or both `input_box` and `output_polytope`".into(),
                ))
            }
        };
        if let Some(p) = raw.proportion {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("proportion {p} not in [0, 1]")));
            }
            problem.proportion = Some(p);
        }
        Ok(problem)
    }

    pub fn to_json(&self) -> String {
        let raw = if let Some(rob) = &self.robustness {
            SpecJson {
                input_box: None,
                output_polytope: None,
                robustness: Some(rob.clone()),
                proportion: self.proportion,
            }
        } else {
            SpecJson {
                input_box: Some(self.input.clone()),
                output_polytope: Some(PolytopeJson {
                    a: self.output.a.rows().into_iter().map(|r| r.to_vec()).collect(),
                    b: self.output.b.to_vec(),
                }),
                robustness: None,
                proportion: self.proportion,
            }
        };
        serde_json::to_string_pretty(&raw).expect("spec serialization cannot fail")
    }

    pub fn quantitative(&self) -> Result<QuantitativeSpec> {
        QuantitativeSpec::new(self.input.clone(), self.output.clone(), self.proportion.unwrap_or(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::running_example;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn robustness_polytope_for_running_example() {
        let spec = RobustnessSpec {
            center: vec![0.0, 0.0],
            epsilon: 1.0,
            norm: Norm::Linf,
            label: 0,
        };
        let (bx, post) = robustness_to_polytope(&spec, 2).unwrap();
        assert_eq!(bx.lower, vec![-1.0, -1.0]);
        assert_eq!(bx.upper, vec![1.0, 1.0]);
        assert_eq!(post.a, array![[-1.0, 1.0]]);
        assert_eq!(post.b, array![0.0]);
    }

    #[test]
    fn zero_radius_box_is_degenerate() {
        let spec = RobustnessSpec {
            center: vec![0.25, -3.0],
            epsilon: 0.0,
            norm: Norm::Linf,
            label: 1,
        };
        let (bx, _) = robustness_to_polytope(&spec, 2).unwrap();
        assert_eq!(bx.lower, bx.upper);
        assert_eq!(bx.volume(), 0.0);
    }

    #[test]
    fn three_class_polytope() {
        let spec = RobustnessSpec {
            center: vec![0.0],
            epsilon: 0.1,
            norm: Norm::Linf,
            label: 1,
        };
        let (_, post) = robustness_to_polytope(&spec, 3).unwrap();
        assert_eq!(post.a, array![[1.0, -1.0, 0.0], [0.0, -1.0, 1.0]]);
        assert_eq!(post.b, array![0.0, 0.0]);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_label = RobustnessSpec {
            center: vec![0.0],
            epsilon: 0.1,
            norm: Norm::Linf,
            label: 2,
        };
        assert!(robustness_to_polytope(&bad_label, 2).is_err());
        let bad_eps = RobustnessSpec {
            epsilon: -1.0,
            label: 0,
            ..bad_label
        };
        assert!(robustness_to_polytope(&bad_eps, 2).is_err());
        assert!(InputBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(QuantitativeSpec::new(
            InputBox::new(vec![0.0], vec![0.0]).unwrap(),
            OutputPolytope::everything(1),
            0.5
        )
        .is_err());
    }

    #[test]
    fn satisfies_examples() {
        let post = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0]).unwrap();
        assert!(satisfies(&[1.0, -2.0], &post).unwrap());
        assert!(satisfies(&[0.0, 0.0], &post).unwrap());
        assert!(!satisfies(&[0.0, 1.0], &post).unwrap());
        assert!(satisfies(&[0.0], &post).is_err());
    }

    #[test]
    fn satisfies_agrees_with_label_off_ties() {
        let net = running_example();
        let spec = RobustnessSpec {
            center: vec![0.2, -0.1],
            epsilon: 0.9,
            norm: Norm::Linf,
            label: 0,
        };
        let (bx, post) = robustness_to_polytope(&spec, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..2000 {
            let x: Vec<f64> = (0..2).map(|i| rng.random_range(bx.lower[i]..=bx.upper[i])).collect();
            let y = net.forward(&x).unwrap();
            if (y[0] - y[1]).abs() < 1e-6 {
                continue;
            }
            checked += 1;
            let robust = net.predicted_label(&x).unwrap() == spec.label;
            assert_eq!(satisfies(&y, &post).unwrap(), robust);
        }
        assert!(checked > 1000);
    }

    #[test]
    fn negated_row_partitions_output_space() {
        let post = OutputPolytope::from_rows(&[vec![2.0, -1.0]], &[0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let y = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let inside = satisfies(&y, &post).unwrap();
            let strictly_outside = post.violation(&y) > 0.0;
            assert!(inside != strictly_outside || post.violation(&y).abs() <= SATISFY_TOL);
        }
    }

    #[test]
    fn spec_json_forms() {
        let p = Problem::from_json_str(
            r#"{"input_box":{"lower":[-1,-1],"upper":[1,1]},"output_polytope":{"A":[[-1,1]],"b":[0]},"proportion":0.9}"#,
            2,
        )
        .unwrap();
        assert_eq!(p.proportion, Some(0.9));
        assert_eq!(p.output.num_rows(), 1);
        let r = Problem::from_json_str(r#"{"robustness":{"center":[0,0],"epsilon":1,"label":0}}"#, 2).unwrap();
        assert_eq!(r.input, p.input);
        assert_eq!(r.output, p.output);
        let back = Problem::from_json_str(&p.to_json(), 2).unwrap();
        assert_eq!(back, p);
        assert!(Problem::from_json_str(r#"{"proportion":0.5}"#, 2).is_err());
        assert!(Problem::from_json_str(
            r#"{"input_box":{"lower":[0],"upper":[1]},"output_polytope":{"A":[[1,2,3]],"b":[0]}}"#,
            2
        )
        .is_err());
    }
}
