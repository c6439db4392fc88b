//! Experiment plumbing: configuration, toy datasets, training runs, metrics,
//! complexity benchmarks, verification suites and the command line.

pub mod bench;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod metrics;
pub mod run;
pub mod verify;

pub use bench::{bench_parallel_inference, complexity_report, ComplexityRow, ParallelReport};
pub use cli::cli_main;
pub use config::{Algorithm, RunConfig};
pub use datasets::{gen_toy_dataset, ToyKind};
pub use metrics::{metrics_csv, write_metrics};
pub use run::{evaluate, run_training, train_with, RunOutcome};
pub use verify::{run_suite, Check, Suite};
