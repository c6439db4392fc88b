//! Learn per-unit precisions alongside the weights. Output units that carry
//! pure noise end up with a low precision, so they stop dominating inference.
//!
//! Hidden layers are left out on purpose: their errors shrink towards zero
//! during training, the learned precision hits its ceiling and inference
//! with a fixed step size becomes unstable.
//!
//! ```text
//! cargo run --release --example precision_learning
//! ```

use pcnet::pcn::{train_il, TrainOptions};
use pcnet::*;

fn main() -> Result<()> {
    let mut rng = Rng::new(12);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let x = rng.uniform(-1.0, 1.0);
        xs.push(Vector::from(vec![x]));
        // first target: 0.5 x with noise of std 0.1; second: unrelated noise of std 2
        ys.push(Vector::from(vec![0.5 * x + 0.1 * rng.normal(), 2.0 * rng.normal()]));
    }
    let data = Dataset::new("noisy", xs, Some(ys))?;
    let topo = Topology::uniform(vec![1, 2], Activation::Linear, Direction::Discriminative)?;
    let mut pcn = Pcn::init(topo, &mut Rng::new(1), 0.3);
    let opts = TrainOptions {
        epochs: 20,
        batch_size: 20,
        learn_precisions: true,
        ..Default::default()
    };
    train_il(&mut pcn, &data, &InferenceConfig::fixed(0.1, 20), &mut Optimizer::adam(0.01), &opts)?;
    for (l, p) in pcn.precisions.layers().iter().enumerate() {
        if let Some(p) = p {
            let p: Vec<String> = p.iter().map(|v| format!("{v:.3}")).collect();
            println!("layer {l} precisions: {} (noise precisions 100 and 0.25)", p.join(", "));
        }
    }
    Ok(())
}
