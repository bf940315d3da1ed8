//! Batch-means summaries of per-sample values.

use crate::numeric::KahanSum;

/// Mean and batch-means standard error of a sample sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Splits `values` into `n_batches` contiguous equal batches and returns the
/// grand mean with `sd(batch means) / sqrt(n_batches)`.
///
/// Panics if `values.len()` is not a positive multiple of `n_batches` or if
/// `n_batches < 2`.
pub fn batch_means(values: &[f64], n_batches: usize) -> BatchEstimate {
    let means = batch_mean_vector(values, n_batches);
    summarize(&means)
}

pub fn batch_mean_vector(values: &[f64], n_batches: usize) -> Vec<f64> {
    assert!(n_batches >= 2, "need at least two batches");
    assert!(
        !values.is_empty() && values.len().is_multiple_of(n_batches),
        "sample count must be a positive multiple of the batch count"
    );
    let size = values.len() / n_batches;
    values
        .chunks_exact(size)
        .map(|c| {
            let mut k = KahanSum::new();
            for &x in c {
                k.add(x);
            }
            k.total() / size as f64
        })
        .collect()
}

fn summarize(means: &[f64]) -> BatchEstimate {
    let b = means.len() as f64;
    let mut k = KahanSum::new();
    for &m in means {
        k.add(m);
    }
    let mean = k.total() / b;
    let mut v = KahanSum::new();
    for &m in means {
        v.add((m - mean) * (m - mean));
    }
    let var = v.total() / (b - 1.0);
    BatchEstimate {
        mean,
        se: (var / b).sqrt(),
    }
}

/// Paired estimate of two expectations from common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedEstimate {
    pub mean_lhs: f64,
    pub mean_rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub se_diff: f64,
    pub n: usize,
}

impl PairedEstimate {
    pub fn from_values(lhs: &[f64], rhs: &[f64], n_batches: usize) -> Self {
        assert_eq!(lhs.len(), rhs.len());
        let l = batch_means(lhs, n_batches);
        let r = batch_means(rhs, n_batches);
        let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let d = batch_means(&diff, n_batches);
        Self {
            mean_lhs: l.mean,
            mean_rhs: r.mean,
            se_lhs: l.se,
            se_rhs: r.se,
            se_diff: d.se,
            n: lhs.len(),
        }
    }

    /// Deterministic sides: lhs is known exactly, only rhs is estimated.
    pub fn against_constant(lhs: f64, rhs: &[f64], n_batches: usize) -> Self {
        let r = batch_means(rhs, n_batches);
        Self {
            mean_lhs: lhs,
            mean_rhs: r.mean,
            se_lhs: 0.0,
            se_rhs: r.se,
            se_diff: r.se,
            n: rhs.len(),
        }
    }
}
