//! Matmul-count complexity checks and the parallel inference benchmark.
//!
//! Closed forms, counted by hand from the update equations of a net with
//! `L` transitions and `T` inference steps:
//!
//! * BP: `L` forward products, `L − 1` backward products, `L` gradient outer
//!   products, so `3L − 1`. Everything is a chain, so the critical path is
//!   the same.
//! * IL: each step refreshes `L` predictions and updates `L − 1` hidden
//!   layers at two products each (the recomputed pre-activation and the
//!   transposed product), then `L` outer products: `T(3L − 2) + L`. Within a
//!   step all predictions are independent, then all layer updates, so the
//!   critical path is `3T + 1` (`T + 1` when `L = 1`).
//! * Incremental IL: one inference step plus `L` outer products per weight
//!   update, `4L − 2`, with critical path `4` (`2` when `L = 1`).
//!
//! The one-off feedforward initialization (`L` products) is not part of a
//! weight update and is excluded.

use std::time::Instant;

use serde::Serialize;

use super::config::Algorithm;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::fnn::{bp_gradients, Direction, Optimizer, Topology};
use crate::numerics::counter::measure;
use crate::numerics::{Activation, Executor, OpCount, Rng, Vector};
use crate::pcn::ClampMode;
use crate::pcn::{InferenceConfig, NetState, Pcn};

pub fn predicted_matmuls(alg: Algorithm, l: u64, t: u64) -> Option<u64> {
    match alg {
        Algorithm::Bp => Some(3 * l - 1),
        Algorithm::Il => Some(t * (3 * l - 2) + l),
        Algorithm::IncrementalIl => Some(4 * l - 2),
        Algorithm::Zil | Algorithm::GraphIl => None,
    }
}

/// Critical path of one inference step: a prediction, then (when there are
/// hidden layers) two dependent products per layer update.
fn step_depth(l: u64) -> u64 {
    if l >= 2 {
        3
    } else {
        1
    }
}

pub fn predicted_critical_path(alg: Algorithm, l: u64, t: u64) -> Option<u64> {
    match alg {
        Algorithm::Bp => Some(3 * l - 1),
        Algorithm::Il => Some(t * step_depth(l) + 1),
        Algorithm::IncrementalIl => Some(step_depth(l) + 1),
        Algorithm::Zil | Algorithm::GraphIl => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub algorithm: &'static str,
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub measured: u64,
    pub predicted: u64,
    pub critical_path: u64,
    pub predicted_critical_path: u64,
}

impl ComplexityRow {
    pub fn exact(&self) -> bool {
        self.measured == self.predicted && self.critical_path == self.predicted_critical_path
    }
}

fn chain(l: usize, width: usize) -> Result<Topology> {
    Topology::uniform(vec![width; l + 1], Activation::Tanh, Direction::Discriminative)
}

fn bench_sample(width: usize, rng: &mut Rng) -> Sample {
    Sample {
        x: (0..width).map(|_| rng.normal()).collect(),
        y: Some((0..width).map(|_| rng.normal()).collect()),
    }
}

/// Count the matmul events of one weight update on a width-`width` chain
/// with `l` transitions.
pub fn measure_update(alg: Algorithm, l: usize, t: usize, width: usize) -> Result<ComplexityRow> {
    let (Some(predicted), Some(predicted_cp)) = (
        predicted_matmuls(alg, l as u64, t as u64),
        predicted_critical_path(alg, l as u64, t as u64),
    ) else {
        return Err(Error::Unsupported(format!("no closed form for {}", alg.name())));
    };
    if l == 0 || t == 0 || width == 0 {
        return Err(Error::Precondition("depth, steps and width must be positive".into()));
    }
    let mut rng = Rng::new(0);
    let mut pcn = Pcn::init(chain(l, width)?, &mut rng, 0.5);
    let sample = bench_sample(width, &mut rng);
    let cfg = InferenceConfig::fixed(0.1, t);
    let mut opt = Optimizer::sgd(0.01);
    let count: OpCount = match alg {
        Algorithm::Bp => {
            let y = sample.y.as_ref().expect("labelled");
            let (res, c) = measure(|| bp_gradients(&pcn.params, &pcn.topology, &sample.x, y));
            res?;
            c
        }
        Algorithm::Il => {
            let mut s = pcn.prepare_state(&sample, ClampMode::Supervised)?;
            let (res, c) = measure(|| -> Result<()> {
                pcn.infer(&mut s, &cfg)?;
                let g = pcn.weight_gradients(&s);
                opt.step(&mut pcn.params.weights, &g)
            });
            res?;
            c
        }
        Algorithm::IncrementalIl => {
            let (res, init) = measure(|| pcn.prepare_state(&sample, ClampMode::Supervised));
            res?;
            let (res, c) = measure(|| pcn.incremental_il_update(&[&sample], &cfg, &mut opt, ClampMode::Supervised, false));
            let updates = res?.weight_updates as u64;
            let body = c - init;
            if updates == 0 || body.matmuls % updates != 0 || body.critical_path % updates != 0 {
                return Err(Error::Precondition("incremental IL updates have unequal costs".into()));
            }
            OpCount {
                matmuls: body.matmuls / updates,
                flops: body.flops / updates,
                critical_path: body.critical_path / updates,
            }
        }
        Algorithm::Zil | Algorithm::GraphIl => unreachable!(),
    };
    Ok(ComplexityRow {
        algorithm: alg.name(),
        depth: l,
        steps: t,
        measured: count.matmuls,
        predicted,
        critical_path: count.critical_path,
        predicted_critical_path: predicted_cp,
    })
}

pub fn complexity_report(alg: Algorithm, depths: &[usize], t: usize, width: usize) -> Result<Vec<ComplexityRow>> {
    depths.iter().map(|&l| measure_update(alg, l, t, width)).collect()
}

pub fn complexity_csv(rows: &[ComplexityRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Dataset(e.to_string()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParallelRow {
    pub workers: usize,
    pub wall_ns_per_step: u64,
    pub matmuls_per_step: u64,
    pub critical_path_per_step: u64,
    /// Final state bitwise equal to the first worker count's.
    pub bitwise_equal: bool,
}

#[derive(Clone, Debug)]
pub struct ParallelReport {
    pub depth: usize,
    pub steps: usize,
    pub rows: Vec<ParallelRow>,
}

impl ParallelReport {
    pub fn all_equal(&self) -> bool {
        self.rows.iter().all(|r| r.bitwise_equal)
    }
}

/// Run `t` simultaneous inference steps on `topo` with each worker count
/// and compare the final states bit for bit.
pub fn bench_parallel_inference(topo: &Topology, t: usize, worker_counts: &[usize], seed: u64) -> Result<ParallelReport> {
    if worker_counts.is_empty() || t == 0 {
        return Err(Error::Precondition("need at least one worker count and one step".into()));
    }
    let mut rng = Rng::new(seed);
    let base = Pcn::init(topo.clone(), &mut rng, 0.5);
    let l = topo.depth();
    let sample = Sample {
        x: (0..topo.width(0)).map(|_| rng.normal()).collect::<Vector>(),
        y: Some((0..topo.width(l)).map(|_| rng.normal()).collect()),
    };
    let cfg = InferenceConfig::fixed(0.1, t);
    let mut reference: Option<NetState> = None;
    let mut rows = Vec::with_capacity(worker_counts.len());
    for &k in worker_counts {
        let pcn = base.clone().with_executor(Executor::with_workers(k)?);
        let mut s = pcn.prepare_state(&sample, ClampMode::Supervised)?;
        let start = Instant::now();
        let (res, c) = measure(|| pcn.infer(&mut s, &cfg));
        let wall = start.elapsed().as_nanos() as u64;
        res?;
        let equal = match &reference {
            None => {
                reference = Some(s.clone());
                true
            }
            Some(r) => r.bitwise_eq(&s),
        };
        rows.push(ParallelRow {
            workers: k,
            wall_ns_per_step: wall / t as u64,
            matmuls_per_step: c.matmuls / t as u64,
            critical_path_per_step: c.critical_path / t as u64,
            bitwise_equal: equal,
        });
    }
    Ok(ParallelReport { depth: l, steps: t, rows })
}

pub fn parallel_csv(report: &ParallelReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Dataset(e.to_string()))
}
