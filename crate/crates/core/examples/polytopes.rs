//! The geometry layer on its own: a linear program, planar vertices and
//! area, and a Monte Carlo estimate of the same area.

use ndarray::array;
use relucert::geometry::{lp_solve, polygon_area, vertices_2d, volume, HalfspacePolytope, Sense, VolumeMethod};
use relucert::InputBox;

fn main() -> relucert::Result<()> {
    // x >= 0, y >= 0, x + y <= 1, x - y <= 0.5
    let tri = HalfspacePolytope::new(
        array![[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0], [1.0, -1.0]],
        array![0.0, 0.0, 1.0, 0.5],
    )?;
    let lp = lp_solve(&tri, &[1.0, 0.0], Sense::Max)?;
    println!("max x = {:?} at {:?}", lp.optimum, lp.witness);

    let verts = vertices_2d(&tri)?;
    println!("vertices {verts:?}, area {}", polygon_area(&verts));

    let frame = InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0])?;
    let mc = volume(&tri, VolumeMethod::monte_carlo(7), &frame)?;
    println!("Monte Carlo area {mc:.4}");
    Ok(())
}
