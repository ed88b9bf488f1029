//! Pull y1 >= y2 back through the network, one layer at a time.

use relucert::geometry::VolumeMethod;
use relucert::model::running_example;
use relucert::preimage::{preimage_exact, DEFAULT_PREIMAGE_CAP};
use relucert::{InputBox, OutputPolytope};

fn main() -> relucert::Result<()> {
    let net = running_example();
    let square = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let post = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0])?;

    let mut pre = preimage_exact(&net, &square, &post, DEFAULT_PREIMAGE_CAP)?;
    for (k, stage) in pre.stages.iter().enumerate().rev() {
        println!("input of layer {k}: {} polytopes", stage.len());
    }
    for p in &pre.stages[1] {
        println!("  hidden piece {}:", p.pattern.tag(&net));
        for (row, rhs) in p.polytope.rows() {
            println!("    {row:?} . z <= {rhs}");
        }
    }

    pre.compute_volumes(VolumeMethod::Exact2D)?;
    let total = pre.union_volume(VolumeMethod::Exact2D)?;
    println!("union area {total:.6} of {:.1}", square.volume());
    Ok(())
}
