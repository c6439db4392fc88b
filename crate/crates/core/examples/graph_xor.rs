//! Predictive coding on a fully connected 12-node graph. Nodes 0 and 1 take
//! the inputs, node 2 the label. Prediction runs a long inference with only
//! the inputs clamped.
//!
//! ```text
//! cargo run --release --example graph_xor
//! ```

use pcnet::pcgraph::{train_graph, AdjacencyMask, ClampingPlan, GraphInit, GraphTrainOptions, PcGraph};
use pcnet::*;

fn main() -> Result<()> {
    let n = 12;
    let mut acts = vec![Activation::Tanh; n];
    acts[2] = Activation::Sigmoid;
    let mask = AdjacencyMask::fully_connected(n);
    println!("{} nodes, {} edges, acyclic: {}", n, mask.edge_count(), mask.is_acyclic());

    let mut g = PcGraph::init(mask, acts, &mut Rng::new(4), 0.5)?;
    let plan = ClampingPlan {
        x_nodes: vec![0, 1],
        y_nodes: vec![2],
    };
    let test = InferenceConfig::fixed(0.1, 2000);
    let opts = GraphTrainOptions {
        epochs: 100,
        stop_at_accuracy: Some(1.0),
        test_inference: Some(test),
        ..Default::default()
    };
    let data = Dataset::xor();
    let report = train_graph(&mut g, &data, &plan, &InferenceConfig::fixed(0.1, 50), &mut Optimizer::adam(0.02), &opts)?;
    println!("converged at epoch {:?}", report.converged_epoch);

    for s in data.samples() {
        let y = g.predict(&plan, &s.x, &test, GraphInit::Zeros)?;
        println!("{:?} -> {:.3}", &s.x[..], y[0]);
    }
    Ok(())
}
