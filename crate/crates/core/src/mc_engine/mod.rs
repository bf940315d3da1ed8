//! Reproducible, parallel outer-expectation estimation.
//!
//! Outer sample `i` always draws from `derive_stream(seed, OUTER_LANE, i)`.
//! Batches are contiguous index ranges; workers take batches round-robin and
//! results are reassembled in batch order, so the output is a pure function of
//! the configuration and the sampler regardless of the worker count.

mod batch;
mod stream;

pub use batch::{batch_mean_vector, batch_means, BatchEstimate, PairedEstimate};
pub use stream::{derive_stream, Stream, AUX_LANE, OUTER_LANE};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n_outer: usize,
    pub n_batches: usize,
    pub seed: u64,
    pub workers: usize,
    pub z_max: f64,
    /// Overrides the PD truncation level for single-level targets.
    pub truncation: Option<usize>,
    /// Overrides the cascade leaf budget.
    pub leaf_budget: Option<usize>,
    /// Record wall-clock time in reports; off by default so output is
    /// reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_outer: 100_000,
            n_batches: 32,
            seed: 0,
            workers: 1,
            z_max: 4.0,
            truncation: None,
            leaf_budget: None,
            timing: false,
        }
    }
}

impl EstimatorConfig {
    pub fn with_n_outer(mut self, n: usize) -> Self {
        self.n_outer = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_batches < 2 {
            return invalid("n_batches must be at least 2");
        }
        if self.n_outer < self.n_batches {
            return invalid(format!(
                "n_outer ({}) is smaller than n_batches ({})",
                self.n_outer, self.n_batches
            ));
        }
        if !self.n_outer.is_multiple_of(self.n_batches) {
            return invalid(format!(
                "n_outer ({}) must be divisible by n_batches ({})",
                self.n_outer, self.n_batches
            ));
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        if !(self.z_max > 0.0) {
            return invalid("z_max must be positive");
        }
        Ok(())
    }
}

/// Evaluates `sampler(i, stream_i)` for every outer sample and returns the
/// records in sample-index order.
pub fn run_samples<R, F>(config: &EstimatorConfig, sampler: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64, &mut Stream) -> R + Sync,
{
    config.validate()?;
    let n_batches = config.n_batches;
    let size = config.n_outer / n_batches;
    let run_batch = |b: usize| -> Vec<R> {
        (b * size..(b + 1) * size)
            .map(|i| {
                let mut s = derive_stream(config.seed, OUTER_LANE, i as u64);
                sampler(i as u64, &mut s)
            })
            .collect()
    };

    let workers = config.workers.min(n_batches);
    let mut batches: Vec<Option<Vec<R>>> = (0..n_batches).map(|_| None).collect();
    if workers == 1 {
        for (b, slot) in batches.iter_mut().enumerate() {
            *slot = Some(run_batch(b));
        }
    } else {
        let per_worker: Vec<Vec<(usize, Vec<R>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_batch = &run_batch;
                    scope.spawn(move || {
                        (w..n_batches)
                            .step_by(workers)
                            .map(|b| (b, run_batch(b)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for (b, recs) in per_worker.into_iter().flatten() {
            batches[b] = Some(recs);
        }
    }
    Ok(batches
        .into_iter()
        .flat_map(|b| b.expect("every batch is evaluated"))
        .collect())
}

/// Runs a sampler yielding `(lhs, rhs)` per outer sample and summarizes both
/// sides and their difference with batch means.
pub fn run_paired<F>(config: &EstimatorConfig, sampler: F) -> Result<PairedEstimate>
where
    F: Fn(&mut Stream) -> (f64, f64) + Sync,
{
    let recs = run_samples(config, |_, s| sampler(s))?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    Ok(PairedEstimate::from_values(&lhs, &rhs, config.n_batches))
}
