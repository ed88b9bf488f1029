//! Big-M mixed-integer encoding written in CPLEX LP format.
//!
//! Pipe the output into any LP-format MILP solver; the model is infeasible
//! exactly when the property holds.

use relucert::bounds::{crown_propagate, AlphaPolicy};
use relucert::complete::MilpModel;
use relucert::model::running_example;
use relucert::{InputBox, OutputPolytope};

fn main() -> relucert::Result<()> {
    let net = running_example();
    let square = InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let post = OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0])?;
    let bounds = crown_propagate(&net, &square, &AlphaPolicy::Zero)?.bounds;

    let model = MilpModel::build(&net, &square, &post, &bounds)?;
    eprintln!("binaries: {:?}", model.binaries());
    // small enough to solve by trying every binary assignment
    let maxima = model.row_maxima_by_enumeration(16)?;
    eprintln!("max of -y1 + y2 over all assignments: {maxima:?} (property holds iff <= 0)");
    print!("{}", model.to_lp_string());
    Ok(())
}
