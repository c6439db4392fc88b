//! Inference learning (IL) and incremental IL training loops.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{update_precisions, EnergyReport, InferenceConfig, NetState, Pcn};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fnn::{Direction, Optimizer};
use crate::numerics::counter::measure;
use crate::numerics::Matrix;

/// Which layers a training sample clamps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClampMode {
    /// Input at layer 0 and label at layer L.
    #[default]
    Supervised,
    /// Only the data at layer 0 (generative nets, autoencoder style).
    Unsupervised,
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Samples per weight update; gradients are averaged over the batch.
    pub batch_size: usize,
    pub mode: ClampMode,
    /// Run the diagonal precision M-step after every update.
    pub learn_precisions: bool,
    /// Stop as soon as training accuracy reaches this value.
    pub stop_at_accuracy: Option<f64>,
    /// Fill in `wall_ns`; off by default so metrics are reproducible.
    pub record_timing: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            batch_size: 1,
            mode: ClampMode::Supervised,
            learn_precisions: false,
            stop_at_accuracy: None,
            record_timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Index of the last batch processed in this epoch.
    pub sample: usize,
    /// Mean post-inference energy over the epoch's samples.
    pub energy_total: f64,
    pub output_loss: f64,
    pub residual: f64,
    pub train_accuracy: Option<f64>,
    pub wall_ns: u64,
    /// Cumulative matmul events spent on training.
    pub matmuls: u64,
    pub flops: u64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    /// First epoch at which `stop_at_accuracy` was reached.
    pub converged_epoch: Option<usize>,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|m| m.train_accuracy)
    }
}

/// Result of one call to [`Pcn::il_update`] or [`Pcn::incremental_il_update`].
#[derive(Clone, Debug, Default)]
pub struct UpdateOutcome {
    /// Mean energy over the batch after inference.
    pub energy: EnergyReport,
    pub steps: usize,
    pub weight_updates: usize,
}

fn with_alpha(e: Error, alpha: f64) -> Error {
    match e {
        Error::Divergence { energy, gamma, .. } => Error::Divergence { energy, gamma, alpha },
        other => other,
    }
}

fn mean_gradients(per_sample: Vec<Vec<Matrix>>) -> Vec<Matrix> {
    let n = per_sample.len();
    let mut it = per_sample.into_iter();
    let mut acc = it.next().expect("non-empty batch");
    for g in it {
        for (a, b) in acc.iter_mut().zip(&g) {
            a.axpy(1.0, b);
        }
    }
    if n > 1 {
        acc.iter_mut().for_each(|m| m.scale(1.0 / n as f64));
    }
    acc
}

fn check_energy(e: f64, gamma: f64, alpha: f64) -> Result<()> {
    if !e.is_finite() || e > super::DIVERGENCE_ENERGY {
        return Err(Error::Divergence { energy: e, gamma, alpha });
    }
    Ok(())
}

impl Pcn {
    /// Clamp a sample according to `mode` and run the feedforward
    /// initialization.
    pub fn prepare_state(&self, sample: &Sample, mode: ClampMode) -> Result<NetState> {
        let mut state = self.zero_state();
        state.clamp(0, &sample.x)?;
        if mode == ClampMode::Supervised {
            let y = sample
                .y
                .as_ref()
                .ok_or_else(|| Error::Dataset("supervised training needs labels".into()))?;
            state.clamp(self.depth(), y)?;
        }
        self.feedforward_init(&mut state)?;
        Ok(state)
    }

    /// One IL weight update: feedforward init, inference, one optimizer
    /// step on the batch-averaged gradient.
    pub fn il_update(
        &mut self,
        batch: &[&Sample],
        cfg: &InferenceConfig,
        opt: &mut Optimizer,
        mode: ClampMode,
        learn_precisions: bool,
    ) -> Result<UpdateOutcome> {
        let mut states = Vec::with_capacity(batch.len());
        let mut grads = Vec::with_capacity(batch.len());
        let mut energies = Vec::with_capacity(batch.len());
        let mut steps = 0;
        for s in batch {
            let mut st = self.prepare_state(s, mode)?;
            steps += self.infer(&mut st, cfg).map_err(|e| with_alpha(e, opt.alpha()))?.steps_taken;
            grads.push(self.weight_gradients(&st));
            energies.push(self.energy(&st));
            states.push(st);
        }
        opt.step(&mut self.params.weights, &mean_gradients(grads))?;
        if learn_precisions {
            self.precisions = update_precisions(&states)?;
        }
        Ok(UpdateOutcome {
            energy: EnergyReport::mean(&energies),
            steps,
            weight_updates: 1,
        })
    }

    /// Incremental IL: after the feedforward init, each of the `cfg.steps`
    /// iterations takes one inference step and then one weight step.
    pub fn incremental_il_update(
        &mut self,
        batch: &[&Sample],
        cfg: &InferenceConfig,
        opt: &mut Optimizer,
        mode: ClampMode,
        learn_precisions: bool,
    ) -> Result<UpdateOutcome> {
        let mut states: Vec<NetState> = batch.iter().map(|s| self.prepare_state(s, mode)).collect::<Result<_>>()?;
        let mut prev = states.iter().map(|s| self.energy(s).total).sum::<f64>();
        let mut out = UpdateOutcome::default();
        for _ in 0..cfg.steps {
            let mut grads = Vec::with_capacity(states.len());
            let mut total = 0.0;
            for st in states.iter_mut() {
                self.inference_step(st, cfg.gamma, cfg.schedule)?;
                total += self.energy(st).total;
                grads.push(self.weight_gradients(st));
            }
            check_energy(total, cfg.gamma, opt.alpha())?;
            opt.step(&mut self.params.weights, &mean_gradients(grads))?;
            out.steps += 1;
            out.weight_updates += 1;
            let converged = cfg.stop_tol > 0.0 && (prev - total).abs() <= cfg.stop_tol * prev.abs();
            prev = total;
            if converged {
                break;
            }
        }
        if learn_precisions {
            self.precisions = update_precisions(&states)?;
        }
        let energies: Vec<EnergyReport> = states.iter().map(|s| self.energy(s)).collect();
        out.energy = EnergyReport::mean(&energies);
        Ok(out)
    }

    /// Fraction of labelled samples classified correctly by the test-time
    /// forward pass. Single outputs are thresholded at 0.5; wider outputs
    /// compare argmax. `None` for generative nets or unlabelled data.
    pub fn train_accuracy(&self, data: &Dataset) -> Result<Option<f64>> {
        if self.direction() != Direction::Discriminative || !data.is_labelled() {
            return Ok(None);
        }
        let mut correct = 0;
        for s in data.samples() {
            let y_hat = self.test_discriminative(&s.x)?;
            let y = s.y.as_ref().expect("labelled");
            if classify(&y_hat) == classify(y) {
                correct += 1;
            }
        }
        Ok(Some(correct as f64 / data.len() as f64))
    }

    fn check_dataset(&self, data: &Dataset, mode: ClampMode) -> Result<()> {
        let w = self.topology.widths();
        if data.is_empty() {
            return Err(Error::Dataset("empty dataset".into()));
        }
        if data.x_dim() != w[0] {
            return Err(Error::Dataset(format!("inputs have width {}, layer 0 has {}", data.x_dim(), w[0])));
        }
        if mode == ClampMode::Supervised && data.y_dim() != w[self.depth()] {
            return Err(Error::Dataset(format!(
                "labels have width {}, layer {} has {}",
                data.y_dim(),
                self.depth(),
                w[self.depth()]
            )));
        }
        if mode == ClampMode::Unsupervised && self.direction() == Direction::Discriminative {
            return Err(Error::Unsupported("unsupervised training needs a generative net".into()));
        }
        Ok(())
    }
}

fn classify(v: &[f64]) -> usize {
    if v.len() == 1 {
        usize::from(v[0] > 0.5)
    } else {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }
}

type UpdateFn<'a> = dyn FnMut(&mut Pcn, &[&Sample]) -> Result<UpdateOutcome> + 'a;

fn run_epochs(pcn: &mut Pcn, data: &Dataset, opts: &TrainOptions, update: &mut UpdateFn<'_>) -> Result<TrainReport> {
    pcn.check_dataset(data, opts.mode)?;
    if opts.batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    let samples: Vec<&Sample> = data.samples().iter().collect();
    let mut report = TrainReport::default();
    let (mut matmuls, mut flops) = (0, 0);
    for epoch in 1..=opts.epochs {
        let start = opts.record_timing.then(Instant::now);
        let (res, count) = measure(|| -> Result<(Vec<EnergyReport>, usize)> {
            let mut energies = Vec::new();
            let mut last = 0;
            for (b, batch) in samples.chunks(opts.batch_size).enumerate() {
                let out = update(pcn, batch)?;
                energies.extend(std::iter::repeat_n(out.energy, batch.len()));
                last = b;
            }
            Ok((energies, last))
        });
        let (energies, last_batch) = res?;
        let wall_ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        matmuls += count.matmuls;
        flops += count.flops;
        let e = EnergyReport::mean(&energies);
        let acc = pcn.train_accuracy(data)?;
        report.epochs.push(EpochMetrics {
            epoch,
            sample: last_batch,
            energy_total: e.total,
            output_loss: e.output_loss,
            residual: e.residual,
            train_accuracy: acc,
            wall_ns,
            matmuls,
            flops,
        });
        if let (Some(target), Some(acc)) = (opts.stop_at_accuracy, acc) {
            if acc >= target {
                report.converged_epoch = Some(epoch);
                break;
            }
        }
    }
    Ok(report)
}

/// Train with inference learning: per batch, feedforward init, up to
/// `cfg.steps` inference steps, then one weight update.
pub fn train_il(
    pcn: &mut Pcn,
    data: &Dataset,
    cfg: &InferenceConfig,
    opt: &mut Optimizer,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    run_epochs(pcn, data, opts, &mut |p, batch| {
        p.il_update(batch, cfg, opt, opts.mode, opts.learn_precisions)
    })
}

/// Train with incremental IL: one inference step and one weight update per
/// iteration.
pub fn train_incremental_il(
    pcn: &mut Pcn,
    data: &Dataset,
    cfg: &InferenceConfig,
    opt: &mut Optimizer,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    run_epochs(pcn, data, opts, &mut |p, batch| {
        p.incremental_il_update(batch, cfg, opt, opts.mode, opts.learn_precisions)
    })
}
