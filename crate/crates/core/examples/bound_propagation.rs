//! Interval, zonotope and linear-relaxation bounds on [-1, 1]^2.
//!
//! The linear relaxation with zero lower slopes proves y1 >= y2 over the
//! whole square; intervals are printed for every domain so they can be
//! compared directly.

use relucert::bounds::{
    check_with_bounds, crown_propagate, interval_propagate, zonotope_propagate, AlphaPolicy, BoundMethod,
};
use relucert::model::running_example;
use relucert::{InputBox, OutputPolytope};

fn main() -> relucert::Result<()> {
    let net = running_example();
    let square = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;

    let ibp = interval_propagate(&net, &square)?;
    let zono = zonotope_propagate(&net, &square)?;
    let crown = crown_propagate(&net, &square, &AlphaPolicy::Zero)?;
    for (name, lo, hi) in [
        ("interval", &ibp.lower, &ibp.upper),
        ("zonotope", &zono.lower, &zono.upper),
        ("linear", &crown.lower, &crown.upper),
    ] {
        println!(
            "{name:>9}: y1 in [{:.4}, {:.4}], y2 in [{:.4}, {:.4}]",
            lo[0], hi[0], lo[1], hi[1]
        );
    }

    let (l3, u3) = crown.bounds.layer(1);
    println!("hidden pre-activations of layer 2: lower {l3}, upper {u3}");

    let lin = &crown.linear;
    println!("y2 <= {} . x + {}", lin.upper_a.row(1), lin.upper_c[1]);

    // y1 >= y2 written as -y1 + y2 <= 0
    let post = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0])?;
    for method in [
        BoundMethod::Interval,
        BoundMethod::Zonotope,
        BoundMethod::Crown(AlphaPolicy::Zero),
    ] {
        let check = check_with_bounds(&net, &square, &post, &method)?;
        println!("{method:?}: {:?} (row bound {:.4})", check.verdict, check.row_bounds[0]);
    }
    Ok(())
}
