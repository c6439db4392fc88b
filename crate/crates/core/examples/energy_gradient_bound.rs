//! Split the energy into output loss and internal energy, and check the
//! per-layer bound that keeps an inference step from increasing the loss.
//!
//! ```text
//! cargo run --example energy_gradient_bound
//! ```

use pcnet::*;

fn main() -> Result<()> {
    let topo = Topology::uniform(vec![3, 8, 8, 2], Activation::Tanh, Direction::Discriminative)?;
    let pcn = Pcn::init(topo, &mut Rng::new(6), 0.5);
    let mut s = pcn.zero_state();
    s.clamp(0, &[1.0, -0.5, 0.2])?;
    s.clamp(3, &[0.8, -0.8])?;
    pcn.feedforward_init(&mut s)?;

    for step in 0..=20 {
        if step % 5 == 0 {
            let e = pcn.energy(&s);
            let b = pcn.energy_gradient_bound(&s)?;
            println!(
                "step {step:>2}: E {:.5}  output loss {:.5}  bound holds {}",
                e.total, e.output_loss, b.holds
            );
            for l in &b.layers {
                println!("    layer {}: lhs {:+.3e}  rhs {:.3e}", l.layer, l.lhs, l.rhs);
            }
        }
        pcn.inference_step(&mut s, 0.1, InferenceSchedule::Simultaneous)?;
    }
    Ok(())
}
