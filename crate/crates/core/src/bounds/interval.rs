use ndarray::Array1;

use crate::error::Result;
use crate::model::Network;
use crate::property::InputBox;

use super::NeuronBounds;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub bounds: NeuronBounds,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Interval arithmetic layer by layer.
pub fn interval_propagate(net: &Network, input: &InputBox) -> Result<IntervalResult> {
    net.check_input(&input.lower)?;
    let mut lo = Array1::from(input.lower.clone());
    let mut hi = Array1::from(input.upper.clone());
    let mut bounds = NeuronBounds {
        lower: Vec::with_capacity(net.num_layers()),
        upper: Vec::with_capacity(net.num_layers()),
    };
    for layer in net.layers() {
        let (pre_lo, pre_hi) = affine_interval(&layer.weight, &layer.bias, &lo, &hi);
        if layer.is_relu() {
            lo = pre_lo.mapv(|v| v.max(0.0));
            hi = pre_hi.mapv(|v| v.max(0.0));
        } else {
            lo = pre_lo.clone();
            hi = pre_hi.clone();
        }
        bounds.lower.push(pre_lo);
        bounds.upper.push(pre_hi);
    }
    let (lower, upper) = bounds.output();
    Ok(IntervalResult { bounds, lower, upper })
}

/// Image of `[lo, hi]` under `W·z + b`.
pub(crate) fn affine_interval(
    w: &ndarray::Array2<f64>,
    b: &Array1<f64>,
    lo: &Array1<f64>,
    hi: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let mut out_lo = b.clone();
    let mut out_hi = b.clone();
    for (i, row) in w.rows().into_iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c >= 0.0 {
                out_lo[i] += c * lo[j];
                out_hi[i] += c * hi[j];
            } else {
                out_lo[i] += c * hi[j];
                out_hi[i] += c * lo[j];
            }
        }
    }
    (out_lo, out_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::running_example;

    #[test]
    fn running_example_trace() {
        let net = running_example();
        let r = interval_propagate(&net, &InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r.bounds.lower[0].to_vec(), vec![-2.0, -2.0]);
        assert_eq!(r.bounds.upper[0].to_vec(), vec![2.0, 2.0]);
        assert_eq!(r.bounds.lower[1].to_vec(), vec![0.0, -2.0]);
        assert_eq!(r.bounds.upper[1].to_vec(), vec![8.0, 4.0]);
        assert_eq!(r.lower, vec![0.0, -20.0]);
        assert_eq!(r.upper, vec![8.0, 0.0]);
    }

    #[test]
    fn point_box_is_exact() {
        let net = running_example();
        let x = vec![0.3, -0.7];
        let r = interval_propagate(&net, &InputBox::new(x.clone(), x.clone()).unwrap()).unwrap();
        let y = net.forward(&x).unwrap();
        assert_eq!(r.lower, y);
        assert_eq!(r.upper, y);
    }
}
