//! `pcnet` subcommands.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! divergence, 3 failed verification.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::bench::{bench_parallel_inference, complexity_csv, complexity_report, parallel_csv};
use super::config::{Algorithm, RunConfig};
use super::datasets::{gen_toy_dataset, ToyKind};
use super::run::{evaluate, run_training};
use super::verify::{run_suite, Suite};
use crate::error::{Error, Result};
use crate::fnn::{Direction, Topology};
use crate::numerics::Activation;
use crate::pcgraph::ClampingPlan;
use crate::pcn::Checkpoint;
use crate::pcn::InferenceConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "pcnet", version, about = "Predictive coding networks: train, test, benchmark, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train as configured; writes the metrics CSV and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Test(TestArgs),
    /// Count matmuls per weight update, or time parallel inference.
    Bench(BenchArgs),
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Write a toy dataset as CSV.
    GenData {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Input nodes, for graph checkpoints.
    #[arg(long, value_delimiter = ',')]
    x_nodes: Vec<usize>,
    /// Output nodes, for graph checkpoints.
    #[arg(long, value_delimiter = ',')]
    y_nodes: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long = "T", default_value_t = 2000)]
    steps: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated algorithms among bp, il, incremental_il.
    #[arg(long, value_delimiter = ',', default_value = "bp,il,incremental_il")]
    algo: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    depths: Vec<usize>,
    #[arg(long = "T", default_value_t = 16)]
    steps: usize,
    #[arg(long, default_value_t = 4)]
    width: usize,
    /// Time inference across worker counts instead of counting updates.
    #[arg(long)]
    parallel: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_CONFIG,
    }
}

fn emit(out: &Option<PathBuf>, bytes: Vec<u8>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn bench(args: &BenchArgs) -> Result<i32> {
    if args.parallel {
        let topo = Topology::uniform(vec![args.width; args.depth + 1], Activation::Tanh, Direction::Discriminative)?;
        let report = bench_parallel_inference(&topo, args.steps, &args.workers, 0)?;
        emit(&args.out, parallel_csv(&report)?)?;
        if !report.all_equal() {
            eprintln!("parallel results differ from the first worker count");
            return Ok(EXIT_VERIFY);
        }
        return Ok(EXIT_OK);
    }
    let mut rows = Vec::new();
    for a in &args.algo {
        let alg: Algorithm = a.parse()?;
        rows.extend(complexity_report(alg, &args.depths, args.steps, args.width)?);
    }
    emit(&args.out, complexity_csv(&rows)?)?;
    if let Some(bad) = rows.iter().find(|r| !r.exact()) {
        eprintln!("count mismatch: {bad:?}");
        return Ok(EXIT_VERIFY);
    }
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_training(&cfg)?;
            let last = out.report.epochs.last();
            println!(
                "{}: {} epochs, final accuracy {}, metrics {}, checkpoint {}",
                cfg.algorithm.name(),
                out.report.epochs.len(),
                last.and_then(|m| m.train_accuracy).map_or("n/a".to_string(), |a| a.to_string()),
                cfg.output.metrics.display(),
                cfg.output.checkpoint.display()
            );
            Ok(EXIT_OK)
        }
        Command::Test(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let data = crate::data::Dataset::load(&a.dataset)?;
            let plan = (!a.x_nodes.is_empty()).then(|| ClampingPlan {
                x_nodes: a.x_nodes.clone(),
                y_nodes: a.y_nodes.clone(),
            });
            let ev = evaluate(&ck, &data, plan.as_ref(), &InferenceConfig::fixed(a.gamma, a.steps))?;
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| v.to_string());
            println!(
                "samples {}, accuracy {}, output loss {}",
                ev.samples,
                fmt(ev.accuracy),
                fmt(ev.output_loss)
            );
            Ok(EXIT_OK)
        }
        Command::Bench(a) => bench(&a),
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite);
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::GenData { kind, n, seed, out } => {
            let kind: ToyKind = kind.parse()?;
            gen_toy_dataset(kind, n, seed)?.save(&out)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parse `argv` (including the program name) and run one subcommand.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
