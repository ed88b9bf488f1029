//! Integrated gradients against the zero baseline.

use relucert::explain::{input_gradient, integrated_gradients};
use relucert::model::running_example;

fn main() -> relucert::Result<()> {
    let net = running_example();
    let baseline = [0.0, 0.0];
    for x in [[1.0, 0.0], [0.3, -0.8], [-0.6, 0.9]] {
        let label = net.predicted_label(&x)?;
        let ig = integrated_gradients(&net, &x, &baseline, label, 4096)?;
        let gap = net.forward(&x)?[label] - net.forward(&baseline)?[label];
        let sum: f64 = ig.scores.iter().sum();
        println!(
            "x = {x:?} label {label}: IG {:?}, sum {sum:.6} vs f(x) - f(0) = {gap:.6}, gradient {:?}",
            ig.scores,
            input_gradient(&net, &x, label)?
        );
    }
    Ok(())
}
