//! Training runs driven by a [`RunConfig`].

use std::time::Instant;

use super::config::{Algorithm, RunConfig};
use super::metrics::write_metrics;
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fnn::{bp_gradients, forward, Optimizer, Topology};
use crate::numerics::counter::measure;
use crate::numerics::{Executor, Rng};
use crate::pcgraph::{train_graph, AdjacencyMask, ClampingPlan, GraphTrainOptions, PcGraph};
use crate::pcn::Checkpoint;
use crate::pcn::{train_il, train_incremental_il, EpochMetrics, TrainOptions, TrainReport};
use crate::pcn::{InferenceConfig, Pcn};

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
}

type Step<'a> = dyn FnMut(&mut Pcn, &[&Sample]) -> Result<f64> + 'a;

/// Shared epoch loop for the two backprop-equivalent algorithms. `step`
/// returns the summed output loss `½‖ŷ − y‖²` of its batch before the update.
fn supervised_epochs(pcn: &mut Pcn, data: &Dataset, opts: &TrainOptions, step: &mut Step<'_>) -> Result<TrainReport> {
    if !data.is_labelled() {
        return Err(Error::Dataset("backprop training needs labels".into()));
    }
    let samples: Vec<&Sample> = data.samples().iter().collect();
    let mut report = TrainReport::default();
    let (mut matmuls, mut flops) = (0, 0);
    for epoch in 1..=opts.epochs {
        let start = opts.record_timing.then(Instant::now);
        let (res, count) = measure(|| -> Result<(f64, usize)> {
            let mut loss = 0.0;
            let mut last = 0;
            for (b, batch) in samples.chunks(opts.batch_size).enumerate() {
                loss += step(pcn, batch)?;
                last = b;
            }
            Ok((loss, last))
        });
        let (loss, last) = res?;
        matmuls += count.matmuls;
        flops += count.flops;
        let loss = loss / data.len() as f64;
        let acc = pcn.train_accuracy(data)?;
        report.epochs.push(EpochMetrics {
            epoch,
            sample: last,
            energy_total: loss,
            output_loss: loss,
            residual: 0.0,
            train_accuracy: acc,
            wall_ns: start.map_or(0, |s| s.elapsed().as_nanos() as u64),
            matmuls,
            flops,
        });
        if !loss.is_finite() {
            return Err(Error::Divergence {
                energy: loss,
                gamma: f64::NAN,
                alpha: f64::NAN,
            });
        }
        if let (Some(target), Some(acc)) = (opts.stop_at_accuracy, acc) {
            if acc >= target {
                report.converged_epoch = Some(epoch);
                break;
            }
        }
    }
    Ok(report)
}

fn half_loss(pcn: &Pcn, s: &Sample) -> Result<f64> {
    let ws = forward(&pcn.params, &pcn.topology, &s.x)?;
    let y = s.y.as_ref().expect("labelled");
    Ok(0.5 * crate::fnn::mse_loss(ws.output(), y)?)
}

/// Plain backprop on `½‖ŷ − y‖²` with batch-averaged gradients.
pub fn train_bp(pcn: &mut Pcn, data: &Dataset, opt: &mut Optimizer, opts: &TrainOptions) -> Result<TrainReport> {
    supervised_epochs(pcn, data, opts, &mut |p, batch| {
        let mut loss = 0.0;
        let mut acc: Option<Vec<crate::numerics::Matrix>> = None;
        for s in batch {
            loss += half_loss(p, s)?;
            let y = s.y.as_ref().expect("labelled");
            let g = bp_gradients(&p.params, &p.topology, &s.x, y)?;
            match acc.as_mut() {
                None => acc = Some(g),
                Some(a) => a.iter_mut().zip(&g).for_each(|(a, g)| a.axpy(1.0, g)),
            }
        }
        let mut g = acc.expect("non-empty batch");
        if batch.len() > 1 {
            g.iter_mut().for_each(|m| m.scale(1.0 / batch.len() as f64));
        }
        opt.step(&mut p.params.weights, &g)?;
        Ok(loss)
    })
}

/// Z-IL, one sample per update with learning rate `alpha`.
pub fn train_zil_epochs(pcn: &mut Pcn, data: &Dataset, alpha: f64, opts: &TrainOptions) -> Result<TrainReport> {
    if opts.batch_size != 1 {
        return Err(Error::config("batch_size", "zil is online; use 1"));
    }
    supervised_epochs(pcn, data, opts, &mut |p, batch| {
        let s = batch[0];
        let loss = half_loss(p, s)?;
        p.train_zil(&s.x, s.y.as_ref().expect("labelled"), alpha)?;
        Ok(loss)
    })
}

fn train_options(cfg: &RunConfig) -> TrainOptions {
    let t = &cfg.training;
    TrainOptions {
        epochs: t.epochs,
        batch_size: t.batch_size,
        mode: t.mode,
        learn_precisions: t.learn_precisions,
        stop_at_accuracy: t.stop_at_accuracy,
        record_timing: t.record_timing,
    }
}

fn inference_config(cfg: &RunConfig) -> InferenceConfig {
    let t = &cfg.training;
    InferenceConfig {
        gamma: t.gamma,
        steps: t.steps,
        stop_tol: t.stop_tol,
        schedule: t.schedule,
    }
}

/// Broadcast a single activation to `n` entries.
fn broadcast(cfg: &RunConfig, n: usize) -> Result<Vec<crate::numerics::Activation>> {
    let a = cfg.layer_activations(n);
    if a.len() != n {
        return Err(Error::config(
            "model.activations",
            format!("expected 1 or {n} entries, got {}", a.len()),
        ));
    }
    Ok(a)
}

/// Train as configured on `data`, without touching the output files.
pub fn train_with(cfg: &RunConfig, data: &Dataset) -> Result<RunOutcome> {
    cfg.validate()?;
    let t = &cfg.training;
    let mut rng = Rng::new(t.seed);
    let mut opt = Optimizer::new(t.optimizer, t.alpha);
    let icfg = inference_config(cfg);
    if cfg.algorithm == Algorithm::GraphIl {
        let mask_path = cfg.model.mask.as_ref().expect("validated");
        let mask = AdjacencyMask::load(mask_path)?;
        let acts = broadcast(cfg, mask.n())?;
        let mut g = PcGraph::init(mask, acts, &mut rng, cfg.model.init_scale)?;
        let plan = ClampingPlan {
            x_nodes: cfg.model.x_nodes.clone(),
            y_nodes: cfg.model.y_nodes.clone(),
        };
        let opts = GraphTrainOptions {
            epochs: t.epochs,
            init: t.graph_init,
            stop_at_accuracy: t.stop_at_accuracy,
            record_timing: t.record_timing,
            test_inference: t.test_steps.map(|steps| InferenceConfig { steps, ..icfg }),
        };
        let report = train_graph(&mut g, data, &plan, &icfg, &mut opt, &opts)?;
        return Ok(RunOutcome {
            report,
            checkpoint: g.to_checkpoint(t.seed),
        });
    }
    let widths = cfg.model.topology.clone().expect("validated");
    let acts = broadcast(cfg, widths.len() - 1)?;
    let topo = Topology::new(widths, acts, cfg.model.direction)?;
    let mut pcn = Pcn::init(topo, &mut rng, cfg.model.init_scale).with_executor(Executor::with_workers(t.workers)?);
    let opts = train_options(cfg);
    let report = match cfg.algorithm {
        Algorithm::Bp => train_bp(&mut pcn, data, &mut opt, &opts)?,
        Algorithm::Il => train_il(&mut pcn, data, &icfg, &mut opt, &opts)?,
        Algorithm::IncrementalIl => train_incremental_il(&mut pcn, data, &icfg, &mut opt, &opts)?,
        Algorithm::Zil => train_zil_epochs(&mut pcn, data, t.alpha, &opts)?,
        Algorithm::GraphIl => unreachable!(),
    };
    Ok(RunOutcome {
        report,
        checkpoint: Checkpoint::from_pcn(&pcn, t.seed),
    })
}

/// Load the dataset, train, and write the metrics CSV and checkpoint.
pub fn run_training(cfg: &RunConfig) -> Result<RunOutcome> {
    let data = Dataset::load(&cfg.dataset)?;
    let out = train_with(cfg, &data)?;
    write_metrics(&cfg.output.metrics, &out.report.epochs)?;
    out.checkpoint.save(&cfg.output.checkpoint)?;
    Ok(out)
}

/// Accuracy and mean output loss of a checkpoint on a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub output_loss: Option<f64>,
}

/// Evaluate a layered-net checkpoint with the test-time forward pass, or a
/// graph checkpoint by inference with `plan`.
pub fn evaluate(ck: &Checkpoint, data: &Dataset, plan: Option<&ClampingPlan>, cfg: &InferenceConfig) -> Result<Evaluation> {
    if ck.graph.is_some() {
        let plan = plan.ok_or_else(|| Error::config("plan", "graph checkpoints need x and y nodes"))?;
        let g = PcGraph::from_checkpoint(ck)?;
        let accuracy = g.train_accuracy(data, plan, cfg, crate::pcgraph::GraphInit::Zeros)?;
        let mut loss = 0.0;
        if data.is_labelled() {
            for s in data.samples() {
                let y_hat = g.predict(plan, &s.x, cfg, crate::pcgraph::GraphInit::Zeros)?;
                loss += 0.5 * crate::fnn::mse_loss(&y_hat, s.y.as_ref().expect("labelled"))?;
            }
        }
        return Ok(Evaluation {
            samples: data.len(),
            accuracy,
            output_loss: data.is_labelled().then(|| loss / data.len() as f64),
        });
    }
    let pcn = ck.to_pcn()?;
    let accuracy = pcn.train_accuracy(data)?;
    let output_loss = if accuracy.is_some() {
        let mut losses = Vec::with_capacity(data.len());
        for s in data.samples() {
            losses.push(half_loss(&pcn, s)?);
        }
        Some(losses.iter().sum::<f64>() / data.len() as f64)
    } else {
        None
    };
    Ok(Evaluation {
        samples: data.len(),
        accuracy,
        output_loss,
    })
}
