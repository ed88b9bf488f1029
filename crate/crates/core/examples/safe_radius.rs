//! Bracket the largest l-infinity radius around (0.5, 0.5) on which label 0
//! keeps winning.

use relucert::complete::{msr_bounds, BabConfig};
use relucert::model::running_example;

fn main() -> relucert::Result<()> {
    let net = running_example();
    let x = [0.5, 0.5];
    let r = msr_bounds(&net, &x, 0, 1.0, 1e-3, &BabConfig::default())?;
    println!(
        "safe radius in [{}, {}] after {} probes",
        r.lower,
        r.upper,
        r.probes.len()
    );
    for p in r.probes.iter().take(5) {
        println!("  eps {:.4}: {:?}", p.epsilon, p.status);
    }
    Ok(())
}
