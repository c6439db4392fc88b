//! Matrix products per weight update, measured by the operation counter and
//! compared with the hand-derived counts.
//!
//! ```text
//! cargo run --example complexity_counts
//! ```

use pcnet::harness::bench::{complexity_csv, loglog_slope};
use pcnet::harness::{complexity_report, Algorithm};

fn main() -> pcnet::Result<()> {
    let depths = [2, 4, 8, 16];
    let mut rows = Vec::new();
    for alg in [Algorithm::Bp, Algorithm::Il, Algorithm::IncrementalIl] {
        let r = complexity_report(alg, &depths, 16, 4)?;
        let xs: Vec<f64> = r.iter().map(|r| r.depth as f64).collect();
        let serial: Vec<f64> = r.iter().map(|r| r.measured as f64).collect();
        let critical: Vec<f64> = r.iter().map(|r| r.critical_path as f64).collect();
        println!(
            "{:<15} log-log slope: serial {:.3}, critical path {:.3}",
            alg.name(),
            loglog_slope(&xs, &serial),
            loglog_slope(&xs, &critical)
        );
        rows.extend(r);
    }
    println!();
    print!("{}", String::from_utf8_lossy(&complexity_csv(&rows)?));
    Ok(())
}
