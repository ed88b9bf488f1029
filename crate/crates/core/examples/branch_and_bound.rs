//! Complete verification by splitting ReLU neurons.
//!
//! y1 >= y2 holds on the square; the reverse inequality does not, and the
//! verifier returns a concrete counterexample.

use relucert::bounds::{AlphaPolicy, Crown};
use relucert::complete::{branch_score, verify_complete, ActivationPattern, BabConfig};
use relucert::model::running_example;
use relucert::{InputBox, OutputPolytope};

fn main() -> relucert::Result<()> {
    let net = running_example();
    let square = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let config = BabConfig::default();

    let holds = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0])?;
    let v = verify_complete(&net, &square, &holds, &config)?;
    println!(
        "y1 >= y2: {:?} ({} nodes, {} branches)",
        v.status, v.stats.nodes, v.stats.branches
    );

    let fails = OutputPolytope::from_rows(&[vec![1.0, -1.0]], &[0.0])?;
    let v = verify_complete(&net, &square, &fails, &config)?;
    let w = v.witness.expect("falsified runs carry a witness");
    println!("y1 <= y2: {:?} at x = {w:?}, y = {:?}", v.status, net.forward(&w)?);

    // scores the root node would branch on
    let crown = Crown::new(&net, &square, &AlphaPolicy::Zero, None)?;
    let pattern = ActivationPattern::from_bounds(&net, crown.bounds());
    for (layer, neuron) in pattern.unstable() {
        println!(
            "score of neuron ({layer}, {neuron}): {:.4}",
            branch_score(&crown, &[-1.0, 1.0], layer, neuron)
        );
    }
    Ok(())
}
