//! A layered network is a graph whose mask only links adjacent layers.
//! Embedding it and running the same inference gives the same activations.
//!
//! ```text
//! cargo run --example hierarchy_as_graph
//! ```

use pcnet::pcgraph::{embed_hierarchical, ClampingPlan, GraphInit};
use pcnet::*;

fn main() -> Result<()> {
    let topo = Topology::uniform(vec![2, 4, 3, 1], Activation::Tanh, Direction::Discriminative)?;
    let pcn = Pcn::init(topo, &mut Rng::new(2), 0.5);
    let (g, ranges) = embed_hierarchical(&pcn)?;
    println!("layers occupy nodes {ranges:?}");

    let (x, y) = ([0.4, -0.6], [0.2]);
    let mut s = pcn.zero_state();
    s.clamp(0, &x)?;
    s.clamp(3, &y)?;
    pcn.feedforward_init(&mut s)?;
    let cfg = InferenceConfig::fixed(0.1, 50);
    pcn.infer(&mut s, &cfg)?;

    let plan = ClampingPlan {
        x_nodes: ranges[0].clone().collect(),
        y_nodes: ranges[3].clone().collect(),
    };
    let mut gs = g.prepare_state(&plan, &x, Some(&y), GraphInit::TopologicalSweep)?;
    g.infer(&mut gs, &cfg)?;
    for (l, r) in ranges.iter().enumerate() {
        let diff = s.activations[l]
            .iter()
            .zip(&gs.a[r.clone()])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("layer {l}: max |a_pcn - a_graph| = {diff:e}");
    }
    Ok(())
}
