//! Load a network from JSON, evaluate it and read off activation patterns.
//!
//! ```bash
//! cargo run --example forward_pass
//! ```

use relucert::complete::ActivationPattern;
use relucert::Network;

fn main() -> relucert::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/running_example.json");
    let net = Network::from_reader(std::fs::File::open(path).expect("fixture exists"))?;
    println!(
        "{} inputs, {} layers, {} outputs",
        net.input_dim(),
        net.num_layers(),
        net.output_dim()
    );

    for x in [[1.0, 0.0], [0.9, 0.1], [-0.5, 0.5], [0.0, 0.0]] {
        let y = net.forward(&x)?;
        let pattern = ActivationPattern::at_point(&net, &x)?;
        println!(
            "x = {x:?}  y = {y:?}  label {}  pattern {}",
            net.predicted_label(&x)?,
            pattern.tag(&net)
        );
    }
    Ok(())
}
