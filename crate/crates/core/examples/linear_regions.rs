//! Split a 2-D box into the pieces where the network is affine.

use relucert::model::running_example;
use relucert::preimage::linear_regions;
use relucert::InputBox;

fn main() -> relucert::Result<()> {
    let net = running_example();
    let input = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let regions = linear_regions(&net, &input, 1 << 12)?;
    println!("{} regions", regions.len());
    for r in &regions {
        println!(
            "{}  y = {} x + {}",
            r.pattern.tag(&net),
            r.weight
                .rows()
                .into_iter()
                .map(|w| format!("{w}"))
                .collect::<Vec<_>>()
                .join(" / "),
            r.bias
        );
    }
    Ok(())
}
