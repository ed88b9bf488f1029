//! Smallest set of features that, held fixed, keeps the prediction under
//! any epsilon-perturbation of the rest.

use relucert::explain::{brute_force_minimum, explanation_report, integrated_gradients, ore_greedy, ExplainConfig};
use relucert::model::running_example;

fn main() -> relucert::Result<()> {
    let net = running_example();
    let x = [0.9, 0.9];
    let label = net.predicted_label(&x)?;
    let config = ExplainConfig::strict();
    let ig = integrated_gradients(&net, &x, &[0.0, 0.0], label, 512)?;

    for eps in [0.2, 0.9, 1.5] {
        let e = ore_greedy(&net, &x, eps, label, &ig.scores, &config)?;
        let best = brute_force_minimum(&net, &x, eps, label, &config)?;
        println!("{}", explanation_report(&e, &ig));
        println!("  smallest by exhaustive search: {best:?}");
    }
    Ok(())
}
