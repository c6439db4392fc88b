//! Layer-parallel inference on a 16-layer chain. Every worker count gives a
//! bitwise identical state; the critical path stays flat in depth.
//!
//! ```text
//! cargo run --release --example parallel_inference
//! ```

use pcnet::harness::bench_parallel_inference;
use pcnet::*;

fn main() -> Result<()> {
    let topo = Topology::uniform(vec![64; 17], Activation::Tanh, Direction::Discriminative)?;
    let report = bench_parallel_inference(&topo, 100, &[1, 2, 4, 8], 0)?;
    println!("workers | ns/step    | matmuls/step | critical path/step | equal");
    for r in &report.rows {
        println!(
            "{:>7} | {:>10} | {:>12} | {:>18} | {}",
            r.workers, r.wall_ns_per_step, r.matmuls_per_step, r.critical_path_per_step, r.bitwise_equal
        );
    }
    Ok(())
}
