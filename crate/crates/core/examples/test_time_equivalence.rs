//! With only the input clamped, inference reaches zero energy immediately and
//! the output equals a plain forward pass. Running inference afterwards
//! changes nothing.
//!
//! ```text
//! cargo run --example test_time_equivalence
//! ```

use pcnet::fnn::forward;
use pcnet::*;

fn main() -> Result<()> {
    let mut rng = Rng::new(3);
    let topo = Topology::uniform(vec![4, 16, 16, 3], Activation::Tanh, Direction::Discriminative)?;
    let pcn = Pcn::init(topo, &mut rng, 1.0);
    let x = [0.5, -1.0, 0.25, 2.0];

    let pc = pcn.test_discriminative(&x)?;
    let ff = forward(&pcn.params, &pcn.topology, &x)?;
    println!("pc output      {pc:?}");
    println!("forward output {:?}", ff.output());
    println!("bitwise equal: {}", pc.bitwise_eq(ff.output()));

    let mut s = pcn.zero_state();
    s.clamp(0, &x)?;
    pcn.feedforward_init(&mut s)?;
    println!("energy after the feedforward sweep: {}", pcn.energy(&s).total);
    pcn.infer(&mut s, &InferenceConfig::fixed(0.1, 100))?;
    println!("output still equal after 100 steps: {}", s.activations[3].bitwise_eq(&pc));
    Ok(())
}
