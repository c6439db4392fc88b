//! Drive a training run from a JSON config, the same path the `pcnet train`
//! command takes. Outputs go to a temporary directory.
//!
//! ```text
//! cargo run --release --example run_from_config -- examples/configs/graph_xor.json
//! ```

use std::path::PathBuf;

use pcnet::harness::{run_training, RunConfig};

fn main() -> pcnet::Result<()> {
    let path: PathBuf = std::env::args_os()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/xor_il.json"));
    let mut cfg = RunConfig::load(&path)?;
    let out = std::env::temp_dir().join("pcnet-example");
    std::fs::create_dir_all(&out).expect("temp dir is writable");
    cfg.output.metrics = out.join("metrics.csv");
    cfg.output.checkpoint = out.join("checkpoint.json");

    let run = run_training(&cfg)?;
    let last = run.report.epochs.last().unwrap();
    println!(
        "{} on {}: {} epochs, accuracy {:?}, energy {:.3e}",
        cfg.algorithm.name(),
        cfg.dataset.display(),
        run.report.epochs.len(),
        last.train_accuracy,
        last.energy_total
    );
    println!("wrote {} and {}", cfg.output.metrics.display(), cfg.output.checkpoint.display());
    Ok(())
}
