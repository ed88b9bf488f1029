//! Certify that at least 90% of the square satisfies y1 >= y2.
//!
//! The under-approximation starts from one polytope over the whole box
//! and splits input dimensions until the target coverage is reached.
//!
//! ```bash
//! cargo run --example quantitative -- 0.95
//! ```

use relucert::model::running_example;
use relucert::preimage::{verify_quantitative, ApproxConfig};
use relucert::{InputBox, OutputPolytope, QuantitativeSpec};

fn main() -> relucert::Result<()> {
    let p: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let net = running_example();
    let square = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let post = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0])?;

    let spec = QuantitativeSpec::new(square, post, p)?;
    let v = verify_quantitative(&net, &spec, &ApproxConfig::default())?;
    println!(
        "p = {p}: {:?}, coverage {:.4} after {} splits",
        v.status,
        v.coverage,
        v.approx.splits.len()
    );
    for s in &v.approx.splits {
        println!("  split x{} at {:.3} (+{:.4})", s.dim + 1, s.at, s.gain);
    }
    for cell in &v.approx.subdomains {
        println!(
            "  cell {:?}..{:?} covers {:.4}",
            cell.domain.lower, cell.domain.upper, cell.volume
        );
    }
    Ok(())
}
