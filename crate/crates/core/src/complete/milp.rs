use std::fmt::Write as _;

use crate::bounds::NeuronBounds;
use crate::error::{Error, Result};
use crate::geometry::{lp_solve, HalfspacePolytope, LpStatus, Sense};
use crate::model::Network;
use crate::property::{InputBox, OutputPolytope};

use super::STRICT_MARGIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpSense {
    Le,
    Ge,
    Eq,
}

impl MilpSense {
    fn symbol(self) -> &'static str {
        match self {
            MilpSense::Le => "<=",
            MilpSense::Ge => ">=",
            MilpSense::Eq => "=",
        }
    }
}

/// A column. `None` bounds are infinite; binaries ignore their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpVariable {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: MilpSense,
    pub rhs: f64,
}

/// Big-M encoding of `∃ x ∈ box : f(x) ∉ post`.
///
/// Variables are named `x{i}` (inputs), `zh{n}`/`z{n}` (pre/post-activation
/// of hidden neuron `n`, numbered from 1 across layers), `d{n}` (activation
/// indicator of unstable neuron `n`), `y{i}` (outputs) and `p{r}` (row
/// selector, only for multi-row postconditions).
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<MilpVariable>,
    /// Network semantics.
    pub constraints: Vec<MilpConstraint>,
    /// Negated postcondition.
    pub violation: Vec<MilpConstraint>,
    /// `(a_r·y terms, b_r)` for every postcondition row.
    pub post_rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl MilpModel {
    pub fn build(net: &Network, input: &InputBox, post: &OutputPolytope, bounds: &NeuronBounds) -> Result<Self> {
        net.check_input(&input.lower)?;
        post.check_dim(net.output_dim())?;
        let layers = net.layers();
        let hidden = layers.len() - 1;
        for (k, layer) in layers.iter().enumerate().take(hidden) {
            let (lo, hi) = bounds.layer(k);
            for j in 0..layer.output_dim() {
                if !lo[j].is_finite() || !hi[j].is_finite() {
                    return Err(Error::UnboundedNeuron { layer: k, neuron: j });
                }
            }
        }

        let mut m = MilpModel {
            variables: Vec::new(),
            constraints: Vec::new(),
            violation: Vec::new(),
            post_rows: Vec::new(),
        };
        let mut prev: Vec<usize> = (0..net.input_dim())
            .map(|i| m.var(format!("x{}", i + 1), Some(input.lower[i]), Some(input.upper[i]), false))
            .collect();

        let mut n = 0usize;
        for (k, layer) in layers[..hidden].iter().enumerate() {
            let (lo, hi) = bounds.layer(k);
            let mut cur = Vec::with_capacity(layer.output_dim());
            for j in 0..layer.output_dim() {
                n += 1;
                let zh = m.var(format!("zh{n}"), None, None, false);
                let mut terms = vec![(zh, 1.0)];
                terms.extend(prev.iter().zip(layer.weight.row(j)).map(|(&v, &w)| (v, -w)));
                m.constrain(format!("def_zh{n}"), terms, MilpSense::Eq, layer.bias[j]);

                let (l, u) = (lo[j], hi[j]);
                if !layer.is_relu() {
                    let z = m.var(format!("z{n}"), None, None, false);
                    m.constrain(format!("id{n}"), vec![(z, 1.0), (zh, -1.0)], MilpSense::Eq, 0.0);
                    cur.push(z);
                    continue;
                }
                let z = m.var(format!("z{n}"), Some(0.0), None, false);
                if l >= 0.0 {
                    m.constrain(format!("relu{n}"), vec![(z, 1.0), (zh, -1.0)], MilpSense::Eq, 0.0);
                } else if u <= 0.0 {
                    m.constrain(format!("relu{n}"), vec![(z, 1.0)], MilpSense::Eq, 0.0);
                } else {
                    let d = m.var(format!("d{n}"), None, None, true);
                    m.constrain(format!("relu{n}_on"), vec![(z, 1.0), (d, -u)], MilpSense::Le, 0.0);
                    m.constrain(format!("relu{n}_ge"), vec![(z, 1.0), (zh, -1.0)], MilpSense::Ge, 0.0);
                    m.constrain(
                        format!("relu{n}_off"),
                        vec![(z, 1.0), (zh, -1.0), (d, -l)],
                        MilpSense::Le,
                        -l,
                    );
                }
                cur.push(z);
            }
            prev = cur;
        }

        let last = &layers[hidden];
        let ys: Vec<usize> = (0..last.output_dim())
            .map(|i| m.var(format!("y{}", i + 1), None, None, false))
            .collect();
        for (i, &y) in ys.iter().enumerate() {
            let mut terms = vec![(y, 1.0)];
            terms.extend(prev.iter().zip(last.weight.row(i)).map(|(&v, &w)| (v, -w)));
            m.constrain(format!("def_y{}", i + 1), terms, MilpSense::Eq, last.bias[i]);
        }

        let (out_lo, out_hi) = bounds.output();
        for r in 0..post.num_rows() {
            let (a, b) = post.row(r);
            let terms: Vec<(usize, f64)> = ys.iter().zip(a.iter()).map(|(&y, &c)| (y, c)).collect();
            m.post_rows.push((terms, b));
        }
        if post.num_rows() == 1 {
            let (terms, b) = m.post_rows[0].clone();
            m.violation.push(MilpConstraint {
                name: "violate".into(),
                terms: nonzero(terms),
                sense: MilpSense::Ge,
                rhs: b + STRICT_MARGIN,
            });
        } else if post.num_rows() > 1 {
            let mut picks = Vec::new();
            for r in 0..post.num_rows() {
                let (terms, b) = m.post_rows[r].clone();
                // a·y ≥ b + μ − M(1 − p) with M from the output bounds
                let lowest: f64 = terms
                    .iter()
                    .enumerate()
                    .map(|(i, (_, c))| if *c >= 0.0 { c * out_lo[i] } else { c * out_hi[i] })
                    .sum();
                let big_m = (b + STRICT_MARGIN - lowest).max(0.0);
                let p = m.var(format!("p{}", r + 1), None, None, true);
                picks.push((p, 1.0));
                let mut t = terms;
                t.push((p, -big_m));
                m.violation.push(MilpConstraint {
                    name: format!("violate{}", r + 1),
                    terms: nonzero(t),
                    sense: MilpSense::Ge,
                    rhs: b + STRICT_MARGIN - big_m,
                });
            }
            m.violation.push(MilpConstraint {
                name: "pick".into(),
                terms: picks,
                sense: MilpSense::Ge,
                rhs: 1.0,
            });
        }
        Ok(m)
    }

    fn var(&mut self, name: String, lower: Option<f64>, upper: Option<f64>, binary: bool) -> usize {
        self.variables.push(MilpVariable {
            name,
            lower,
            upper,
            binary,
        });
        self.variables.len() - 1
    }

    fn constrain(&mut self, name: String, terms: Vec<(usize, f64)>, sense: MilpSense, rhs: f64) {
        self.constraints.push(MilpConstraint {
            name,
            terms: nonzero(terms),
            sense,
            rhs,
        });
    }

    pub fn binaries(&self) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.binary)
            .map(|v| v.name.as_str())
            .collect()
    }

    /// LP file text. The objective maximizes the first postcondition row.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::from("\\ ReLU network verification query: feasible iff the property fails\n");
        s.push_str("Maximize\n obj: ");
        match self.post_rows.first() {
            Some((terms, _)) if !nonzero(terms.clone()).is_empty() => {
                s.push_str(&self.render_terms(&nonzero(terms.clone())))
            }
            _ => {
                let _ = write!(s, "0 {}", self.variables[0].name);
            }
        }
        s.push_str("\nSubject To\n");
        for c in self.constraints.iter().chain(&self.violation) {
            let _ = writeln!(
                s,
                " {}: {} {} {}",
                c.name,
                self.render_terms(&c.terms),
                c.sense.symbol(),
                num(c.rhs)
            );
        }
        s.push_str("Bounds\n");
        for v in self.variables.iter().filter(|v| !v.binary) {
            let _ = match (v.lower, v.upper) {
                (None, None) => writeln!(s, " {} free", v.name),
                (Some(l), Some(u)) => writeln!(s, " {} <= {} <= {}", num(l), v.name, num(u)),
                (Some(0.0), None) => Ok(()),
                (Some(l), None) => writeln!(s, " {} >= {}", v.name, num(l)),
                (None, Some(u)) => writeln!(s, " -inf <= {} <= {}", v.name, num(u)),
            };
        }
        let bins = self.binaries();
        if !bins.is_empty() {
            s.push_str("Binary\n");
            for b in bins {
                let _ = writeln!(s, " {b}");
            }
        }
        s.push_str("End\n");
        s
    }

    fn render_terms(&self, terms: &[(usize, f64)]) -> String {
        if terms.is_empty() {
            return format!("0 {}", self.variables[0].name);
        }
        let mut out = String::new();
        for (i, (v, c)) in terms.iter().enumerate() {
            let name = &self.variables[*v].name;
            let mag = c.abs();
            let coef = if mag == 1.0 {
                String::new()
            } else {
                format!("{} ", num(mag))
            };
            match (i, *c < 0.0) {
                (0, false) => out.push_str(&format!("{coef}{name}")),
                (0, true) => out.push_str(&format!("- {coef}{name}")),
                (_, false) => out.push_str(&format!(" + {coef}{name}")),
                (_, true) => out.push_str(&format!(" - {coef}{name}")),
            }
        }
        out
    }

    /// Largest value of every postcondition row `a_r·y` over the encoding,
    /// found by solving one LP per assignment of the neuron indicators.
    /// `None` entries mean the encoding is infeasible. Refuses more than
    /// `max_binaries` indicators.
    pub fn row_maxima_by_enumeration(&self, max_binaries: usize) -> Result<Vec<Option<f64>>> {
        let indicators: Vec<usize> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(i, v)| v.binary && self.constraints.iter().any(|c| c.terms.iter().any(|(t, _)| t == i)))
            .map(|(i, _)| i)
            .collect();
        if indicators.len() > max_binaries {
            return Err(Error::CapExceeded {
                count: indicators.len(),
                cap: max_binaries,
            });
        }
        let nv = self.variables.len();
        let mut best = vec![None::<f64>; self.post_rows.len()];
        for mask in 0u64..(1u64 << indicators.len()) {
            let mut poly = HalfspacePolytope::universe(nv);
            for (i, v) in self.variables.iter().enumerate() {
                if v.binary {
                    continue;
                }
                let mut row = vec![0.0; nv];
                if let Some(u) = v.upper {
                    row[i] = 1.0;
                    poly.push(&row, u);
                }
                if let Some(l) = v.lower {
                    row[i] = -1.0;
                    poly.push(&row, -l);
                }
            }
            for (bit, &i) in indicators.iter().enumerate() {
                let val = ((mask >> bit) & 1) as f64;
                let mut row = vec![0.0; nv];
                row[i] = 1.0;
                poly.push(&row, val);
                row[i] = -1.0;
                poly.push(&row, -val);
            }
            for c in &self.constraints {
                let mut row = vec![0.0; nv];
                for (v, w) in &c.terms {
                    row[*v] += w;
                }
                let neg: Vec<f64> = row.iter().map(|v| -v).collect();
                match c.sense {
                    MilpSense::Le => poly.push(&row, c.rhs),
                    MilpSense::Ge => poly.push(&neg, -c.rhs),
                    MilpSense::Eq => {
                        poly.push(&row, c.rhs);
                        poly.push(&neg, -c.rhs);
                    }
                }
            }
            for (r, (terms, _)) in self.post_rows.iter().enumerate() {
                let mut obj = vec![0.0; nv];
                for (v, w) in terms {
                    obj[*v] += w;
                }
                let res = lp_solve(&poly, &obj, Sense::Max)?;
                if res.status == LpStatus::Optimal {
                    let v = res.optimum.expect("optimal");
                    best[r] = Some(best[r].map_or(v, |b: f64| b.max(v)));
                } else {
                    break;
                }
            }
        }
        Ok(best)
    }
}

fn nonzero(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Render the big-M MILP of "some input in the box violates `post`" in LP
/// file format, using precomputed pre-activation `bounds`. The text depends
/// only on the inputs.
pub fn export_milp(net: &Network, input: &InputBox, post: &OutputPolytope, bounds: &NeuronBounds) -> Result<String> {
    Ok(MilpModel::build(net, input, post, bounds)?.to_lp_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{crown_propagate, interval_propagate, AlphaPolicy};
    use crate::model::{running_example, Activation, Layer};
    use ndarray::array;

    fn square() -> InputBox {
        InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn example_post() -> OutputPolytope {
        OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0]).unwrap()
    }

    #[test]
    fn running_example_encoding() {
        let net = running_example();
        let b = crown_propagate(&net, &square(), &AlphaPolicy::Zero).unwrap().bounds;
        let model = MilpModel::build(&net, &square(), &example_post(), &b).unwrap();
        assert_eq!(model.binaries(), vec!["d1", "d2", "d4"]);
        let text = model.to_lp_string();
        assert!(text.contains(" relu1_on: z1 - 2 d1 <= 0\n"), "{text}");
        assert!(text.contains(" relu1_off: z1 - zh1 + 2 d1 <= 2\n"), "{text}");
        assert!(text.contains(" relu4_off: z4 - zh4 + 2 d4 <= 2\n"), "{text}");
        assert!(text.contains(" relu3: z3 - zh3 = 0\n"), "{text}");
        assert!(!text.contains("d3"));
        assert!(text.contains(" violate: - y1 + y2 >= 0.000000001\n"), "{text}");
        assert_eq!(text, export_milp(&net, &square(), &example_post(), &b).unwrap());
    }

    #[test]
    fn encoding_proves_running_example() {
        let net = running_example();
        let b = crown_propagate(&net, &square(), &AlphaPolicy::Zero).unwrap().bounds;
        let model = MilpModel::build(&net, &square(), &example_post(), &b).unwrap();
        let maxima = model.row_maxima_by_enumeration(16).unwrap();
        assert!(maxima[0].unwrap() <= 1e-9);
    }

    #[test]
    fn interval_bounds_also_work() {
        let net = running_example();
        let b = interval_propagate(&net, &square()).unwrap().bounds;
        let model = MilpModel::build(&net, &square(), &example_post(), &b).unwrap();
        assert_eq!(model.binaries(), vec!["d1", "d2", "d4"]);
        let maxima = model.row_maxima_by_enumeration(16).unwrap();
        assert!(maxima[0].unwrap() <= 1e-9);
    }

    #[test]
    fn stable_net_has_no_binaries() {
        let net = running_example();
        let bx = InputBox::new(vec![0.8, 0.1], vec![0.9, 0.2]).unwrap();
        let b = interval_propagate(&net, &bx).unwrap().bounds;
        let text = export_milp(&net, &bx, &example_post(), &b).unwrap();
        assert!(!text.contains("Binary"));
    }

    #[test]
    fn unbounded_neuron_is_rejected() {
        let net = Network::new(
            1,
            vec![
                Layer::new(array![[1.0]], array![0.0], Activation::Relu),
                Layer::new(array![[1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap();
        let bx = InputBox::new(vec![-1.0], vec![1.0]).unwrap();
        let mut b = interval_propagate(&net, &bx).unwrap().bounds;
        b.upper[0][0] = f64::INFINITY;
        let post = OutputPolytope::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        assert!(matches!(
            export_milp(&net, &bx, &post, &b),
            Err(Error::UnboundedNeuron { layer: 0, neuron: 0 })
        ));
    }
}
