use ndarray::{s, Array1, Array2};

use crate::error::Result;
use crate::model::Network;
use crate::property::InputBox;

/// `{center + G·ε : ε ∈ [−1, 1]^m}` with one generator per column of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    pub center: Array1<f64>,
    pub generators: Array2<f64>,
}

impl Zonotope {
    pub fn from_box(input: &InputBox) -> Self {
        let d = input.dim();
        let mut generators = Array2::zeros((d, d));
        for i in 0..d {
            generators[[i, i]] = 0.5 * (input.upper[i] - input.lower[i]);
        }
        Self {
            center: Array1::from(input.center()),
            generators,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// Exact image under `W·z + b`.
    pub fn affine(&self, w: &Array2<f64>, b: &Array1<f64>) -> Self {
        Self {
            center: w.dot(&self.center) + b,
            generators: w.dot(&self.generators),
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.generators.row(i).iter().map(|g| g.abs()).sum()
    }

    pub fn interval(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.dim())
            .map(|i| {
                let r = self.radius(i);
                (self.center[i] - r, self.center[i] + r)
            })
            .unzip()
    }

    /// Upper bound of `a·z` over the zonotope.
    pub fn row_upper(&self, a: &Array1<f64>) -> f64 {
        a.dot(&self.center) + a.dot(&self.generators).iter().map(|g| g.abs()).sum::<f64>()
    }

    /// ReLU transformer: stable neurons exact, each unstable neuron mapped
    /// to `λ·z + μ ± μ` with `λ = u/(u − l)`, `μ = −λ·l/2`, adding one fresh
    /// generator.
    pub fn relu(&self) -> Self {
        let (lo, hi) = self.interval();
        let unstable: Vec<usize> = (0..self.dim()).filter(|&i| lo[i] < 0.0 && hi[i] > 0.0).collect();
        let m = self.num_generators();
        let mut center = self.center.clone();
        let mut generators = Array2::zeros((self.dim(), m + unstable.len()));
        generators.slice_mut(s![.., ..m]).assign(&self.generators);
        for i in 0..self.dim() {
            if hi[i] <= 0.0 {
                center[i] = 0.0;
                generators.row_mut(i).fill(0.0);
            }
        }
        for (k, &i) in unstable.iter().enumerate() {
            let lambda = hi[i] / (hi[i] - lo[i]);
            let mu = -lambda * lo[i] / 2.0;
            center[i] = lambda * center[i] + mu;
            generators.row_mut(i).mapv_inplace(|g| lambda * g);
            generators[[i, m + k]] = mu;
        }
        Self { center, generators }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZonotopeResult {
    pub zonotope: Zonotope,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn zonotope_propagate(net: &Network, input: &InputBox) -> Result<ZonotopeResult> {
    net.check_input(&input.lower)?;
    let mut z = Zonotope::from_box(input);
    for layer in net.layers() {
        z = z.affine(&layer.weight, &layer.bias);
        if layer.is_relu() {
            z = z.relu();
        }
    }
    let (lower, upper) = z.interval();
    Ok(ZonotopeResult {
        zonotope: z,
        lower,
        upper,
    })
}
