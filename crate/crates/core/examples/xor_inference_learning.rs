//! Train a 2-8-1 predictive coding network on XOR with inference learning,
//! then compare it against the same run with incremental IL.
//!
//! ```text
//! cargo run --release --example xor_inference_learning
//! ```

use pcnet::pcn::{train_il, train_incremental_il, TrainOptions};
use pcnet::*;

fn main() -> Result<()> {
    let topo = Topology::new(vec![2, 8, 1], vec![Activation::Tanh, Activation::Sigmoid], Direction::Discriminative)?;
    let data = Dataset::xor();
    let opts = TrainOptions {
        epochs: 4000,
        stop_at_accuracy: Some(1.0),
        ..Default::default()
    };

    let mut il = Pcn::init(topo.clone(), &mut Rng::new(1), 0.05);
    let report = train_il(&mut il, &data, &InferenceConfig::fixed(0.1, 20), &mut Optimizer::adam(0.01), &opts)?;
    let last = report.epochs.last().unwrap();
    println!(
        "IL:             converged at epoch {:?}, energy {:.3e}, {} matmuls",
        report.converged_epoch, last.energy_total, last.matmuls
    );

    let mut iil = Pcn::init(topo, &mut Rng::new(1), 0.05);
    let report = train_incremental_il(&mut iil, &data, &InferenceConfig::fixed(0.1, 3), &mut Optimizer::adam(0.01), &opts)?;
    let last = report.epochs.last().unwrap();
    println!(
        "incremental IL: converged at epoch {:?}, energy {:.3e}, {} matmuls",
        report.converged_epoch, last.energy_total, last.matmuls
    );

    println!("\n x0 x1 | target | IL     | i-IL");
    for s in data.samples() {
        let y = s.y.as_ref().unwrap()[0];
        let a = il.test_discriminative(&s.x)?[0];
        let b = iil.test_discriminative(&s.x)?[0];
        println!(" {:>2} {:>2} | {y:>6} | {a:.4} | {b:.4}", s.x[0], s.x[1]);
    }
    Ok(())
}
