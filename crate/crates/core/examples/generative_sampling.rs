//! A generative network with the label at the root and data at layer 0.
//! After training, clamping a label and sweeping down gives a class
//! prototype; ancestral sampling draws noisy points.
//!
//! ```text
//! cargo run --release --example generative_sampling
//! ```

use pcnet::harness::{gen_toy_dataset, ToyKind};
use pcnet::pcn::{train_il, GenerativeMode, TrainOptions};
use pcnet::*;

fn main() -> Result<()> {
    let data = gen_toy_dataset(ToyKind::TwoGaussians, 200, 0)?;
    let topo = Topology::new(vec![2, 6, 1], vec![Activation::Linear, Activation::Tanh], Direction::Generative)?;
    let mut pcn = Pcn::init(topo, &mut Rng::new(5), 0.1);
    let opts = TrainOptions {
        epochs: 30,
        ..Default::default()
    };
    let report = train_il(&mut pcn, &data, &InferenceConfig::fixed(0.1, 20), &mut Optimizer::adam(0.01), &opts)?;
    println!("energy: first epoch {:.4}, last epoch {:.4}", report.epochs[0].energy_total, report.epochs.last().unwrap().energy_total);

    for label in [0.0, 1.0] {
        let proto = pcn.test_generative(GenerativeMode::Supervised(&[label]))?;
        println!("label {label}: prototype ({:+.3}, {:+.3})", proto[0], proto[1]);
    }
    let mut rng = Rng::new(11);
    for _ in 0..5 {
        let x = pcn.test_generative(GenerativeMode::Ancestral(&mut rng))?;
        println!("sample ({:+.3}, {:+.3})", x[0], x[1]);
    }
    Ok(())
}
