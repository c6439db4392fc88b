//! Matmul event counting and the phase executor.
//!
//! Every counted kernel records one event into a process-wide atomic
//! accumulator and into a thread-local accumulator. The thread-local view is
//! what measurements use: it is exact for the computation running on the
//! current thread even when other threads (other tests, other runs) are busy.
//!
//! Work that may run on several workers is expressed as a *phase* of
//! independent tasks ([`Executor::phase`]). A phase credits the caller with
//! the sum of the tasks' events and advances the caller's critical path by
//! the largest task, regardless of how many workers actually ran it. The
//! critical path is therefore a property of the dependency structure, not of
//! the machine.

use std::cell::Cell;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    /// Number of matrix products (including matrix-vector products and
    /// outer products).
    pub matmuls: u64,
    /// Sum of `m * n * p` over all products.
    pub flops: u64,
    /// Matmul events along the longest chain of dependent products.
    pub critical_path: u64,
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            matmuls: self.matmuls + o.matmuls,
            flops: self.flops + o.flops,
            critical_path: self.critical_path + o.critical_path,
        }
    }
}

impl Sub for OpCount {
    type Output = OpCount;
    fn sub(self, o: OpCount) -> OpCount {
        OpCount {
            matmuls: self.matmuls - o.matmuls,
            flops: self.flops - o.flops,
            critical_path: self.critical_path - o.critical_path,
        }
    }
}

static GLOBAL_MATMULS: AtomicU64 = AtomicU64::new(0);
static GLOBAL_FLOPS: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static LOCAL: Cell<OpCount> = const { Cell::new(OpCount { matmuls: 0, flops: 0, critical_path: 0 }) };
}

/// Record one `(m × n) · (n × p)` product.
pub fn record(m: usize, n: usize, p: usize) {
    let flops = (m * n * p) as u64;
    GLOBAL_MATMULS.fetch_add(1, Ordering::Relaxed);
    GLOBAL_FLOPS.fetch_add(flops, Ordering::Relaxed);
    LOCAL.with(|c| {
        let mut v = c.get();
        v.matmuls += 1;
        v.flops += flops;
        v.critical_path += 1;
        c.set(v);
    });
}

/// Process-wide totals. `critical_path` is not tracked globally and is 0.
pub fn global() -> OpCount {
    OpCount {
        matmuls: GLOBAL_MATMULS.load(Ordering::Relaxed),
        flops: GLOBAL_FLOPS.load(Ordering::Relaxed),
        critical_path: 0,
    }
}

/// Totals attributed to the current thread.
pub fn local() -> OpCount {
    LOCAL.with(|c| c.get())
}

fn set_local(v: OpCount) {
    LOCAL.with(|c| c.set(v));
}

/// Run `f` and return the events it caused on this thread (including work
/// it delegated through [`Executor::phase`]).
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCount) {
    let start = local();
    let r = f();
    (r, local() - start)
}

/// Runs phases of independent tasks, serially or on a fixed rayon pool.
#[derive(Clone, Default)]
pub enum Executor {
    #[default]
    Serial,
    Pool(Arc<rayon::ThreadPool>),
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Executor({} workers)", self.workers())
    }
}

impl Executor {
    /// `workers == 1` gives the serial executor.
    pub fn with_workers(workers: usize) -> Result<Self> {
        match workers {
            0 => Err(Error::Precondition("worker count must be at least 1".into())),
            1 => Ok(Executor::Serial),
            k => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map(|p| Executor::Pool(Arc::new(p)))
                .map_err(|e| Error::Precondition(format!("cannot start {k} workers: {e}"))),
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Executor::Serial => 1,
            Executor::Pool(p) => p.current_num_threads(),
        }
    }

    /// Evaluate `task(0..n)` as one phase. Results come back in index order.
    pub fn phase<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let before = local();
        let timed = |i: usize| {
            let start = local();
            let r = task(i);
            (r, local() - start)
        };
        let results: Vec<(T, OpCount)> = match self {
            Executor::Serial => (0..n).map(timed).collect(),
            Executor::Pool(pool) => pool.install(|| (0..n).into_par_iter().map(timed).collect()),
        };
        let mut total = OpCount::default();
        let mut longest = 0;
        let out = results
            .into_iter()
            .map(|(r, c)| {
                total.matmuls += c.matmuls;
                total.flops += c.flops;
                longest = longest.max(c.critical_path);
                r
            })
            .collect();
        set_local(OpCount {
            matmuls: before.matmuls + total.matmuls,
            flops: before.flops + total.flops,
            critical_path: before.critical_path + longest,
        });
        out
    }
}
