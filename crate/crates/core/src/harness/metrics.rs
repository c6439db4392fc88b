//! Metrics CSV, one row per epoch.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pcn::EpochMetrics;

pub const METRICS_HEADER: [&str; 9] = [
    "epoch",
    "sample",
    "energy_total",
    "output_loss",
    "residual",
    "train_accuracy",
    "wall_ns",
    "matmuls",
    "flops",
];

/// Rows as CSV bytes; a missing accuracy is an empty field.
pub fn metrics_csv(rows: &[EpochMetrics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.sample.to_string(),
            r.energy_total.to_string(),
            r.output_loss.to_string(),
            r.residual.to_string(),
            r.train_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.wall_ns.to_string(),
            r.matmuls.to_string(),
            r.flops.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Dataset(e.to_string()))
}

pub fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    std::fs::write(path, metrics_csv(rows)?).map_err(|e| Error::io(path, e))
}
