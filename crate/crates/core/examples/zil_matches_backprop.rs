//! Z-IL on a deep random network produces exactly the backprop update.
//!
//! ```text
//! cargo run --example zil_matches_backprop
//! ```

use pcnet::fnn::bp_gradients;
use pcnet::*;

fn main() -> Result<()> {
    let mut rng = Rng::new(7);
    let topo = Topology::new(
        vec![3, 6, 5, 4, 2],
        vec![Activation::Tanh, Activation::Relu, Activation::Sigmoid, Activation::Linear],
        Direction::Discriminative,
    )?;
    let mut pcn = Pcn::init(topo, &mut rng, 1.0);
    let (x, y) = ([0.3, -0.8, 0.5], [1.0, -1.0]);
    let alpha = 0.1;

    let bp = bp_gradients(&pcn.params, &pcn.topology, &x, &y)?;
    let deltas = pcn.train_zil(&x, &y, alpha)?;
    for (k, (d, g)) in deltas.iter().zip(&bp).enumerate() {
        println!("W{k}: {}x{}  max |dW + alpha grad| = {:e}", d.rows(), d.cols(), d.max_abs_diff(&g.scaled(-alpha)));
    }
    Ok(())
}
