//! Poisson-Dirichlet PD(ζ) weight sequences.
//!
//! The points of a Poisson process on `(0, ∞)` with intensity
//! `Λ x^{-1-ζ} dx`, listed in decreasing order, are
//! `u_k = (ζ Γ_k / Λ)^{-1/ζ}` where `Γ_k` are the arrival times of a unit-rate
//! Poisson process. Normalizing the first `K` of them gives a truncated PD(ζ)
//! vector; the expected mass of the discarded points below `u_K` is
//! `Λ u_K^{1-ζ} / (1-ζ)`, which is kept as a diagnostic.

use crate::error::{invalid, Result};
use crate::numeric::{kahan_sum, log_sum_exp};
use crate::real::Real;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Default number of atoms kept from a PD(ζ) sequence.
pub const DEFAULT_TRUNCATION: usize = 4096;

/// A PD parameter in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ZetaParam<T>(T);

impl<T: Real> ZetaParam<T> {
    pub fn new(zeta: T) -> Result<Self> {
        if zeta > T::zero() && zeta < T::one() {
            Ok(Self(zeta))
        } else {
            invalid(format!("zeta must lie in (0, 1), got {zeta}"))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// How the mass of the atoms beyond the truncation level is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Drop the tail and renormalize the kept atoms to unit mass.
    Renormalize,
    /// Keep the expected tail mass as a diffuse component made of
    /// infinitely many infinitesimal atoms.
    #[default]
    Diffuse,
}

/// Truncated, normalized, nonincreasing PD(ζ) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    weights: Vec<T>,
    tail_mass_estimate: T,
    zeta: ZetaParam<T>,
}

impl<T: Real> WeightVector<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Expected tail mass relative to the kept (unnormalized) mass.
    pub fn tail_mass_estimate(&self) -> T {
        self.tail_mass_estimate
    }

    pub fn zeta(&self) -> ZetaParam<T> {
        self.zeta
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    /// Fraction of the total mass carried by the diffuse tail when it is
    /// kept instead of renormalized away.
    pub fn diffuse_mass(&self) -> T {
        self.tail_mass_estimate / (T::one() + self.tail_mass_estimate)
    }

    /// Weights of the explicit atoms under the given tail policy.
    pub fn atom_weights(&self, policy: TailPolicy) -> Vec<T> {
        match policy {
            TailPolicy::Renormalize => self.weights.clone(),
            TailPolicy::Diffuse => {
                let scale = T::one() / (T::one() + self.tail_mass_estimate);
                self.weights.iter().map(|&w| w * scale).collect()
            }
        }
    }

    /// `Σ v_l²` over the explicit atoms; diffuse mass contributes nothing.
    pub fn sum_of_squares(&self, policy: TailPolicy) -> T {
        let s = kahan_sum(self.weights.iter().map(|&w| w * w));
        match policy {
            TailPolicy::Renormalize => s,
            TailPolicy::Diffuse => {
                let c = T::one() + self.tail_mass_estimate;
                s / (c * c)
            }
        }
    }
}

/// Cumulative sums of `k` unit exponentials.
pub fn arrival_times<T: Real, R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<T> {
    let mut g = 0.0f64;
    (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            g += e;
            T::lit(g)
        })
        .collect()
}

/// `ln u_k` for the decreasing points of a process with intensity
/// `Λ x^{-1-ζ}`, given `ln Λ` and the arrival times.
pub fn log_points<T: Real>(zeta: ZetaParam<T>, log_intensity: T, gammas: &[T]) -> Vec<T> {
    let z = zeta.get();
    let lz = z.ln();
    gammas
        .iter()
        .map(|&g| -(lz + g.ln() - log_intensity) / z)
        .collect()
}

/// `ln` of the expected mass of the points below `exp(log_smallest)`.
pub fn log_tail_mass<T: Real>(zeta: ZetaParam<T>, log_intensity: T, log_smallest: T) -> T {
    let z = zeta.get();
    log_intensity + (T::one() - z) * log_smallest - (T::one() - z).ln()
}

/// Builds a weight vector from given arrival times `Γ_1 ≤ … ≤ Γ_K`.
pub fn from_arrival_times<T: Real>(zeta: ZetaParam<T>, gammas: &[T]) -> Result<WeightVector<T>> {
    if gammas.len() < 2 {
        return invalid("truncation K must be at least 2");
    }
    if gammas.windows(2).any(|w| w[1] < w[0]) || gammas[0] <= T::zero() {
        return invalid("arrival times must be positive and nondecreasing");
    }
    let logs = log_points(zeta, T::zero(), gammas);
    let lse = log_sum_exp(&logs);
    let tiny = T::min_positive_value();
    let weights: Vec<T> = logs.iter().map(|&l| (l - lse).exp().max(tiny)).collect();
    let log_tail = log_tail_mass(zeta, T::zero(), logs[logs.len() - 1]);
    Ok(WeightVector {
        weights,
        tail_mass_estimate: (log_tail - lse).exp(),
        zeta,
    })
}

/// Samples a truncated PD(ζ) vector with `k` atoms.
pub fn sample_pd<T: Real, R: Rng + ?Sized>(
    zeta: ZetaParam<T>,
    k: usize,
    rng: &mut R,
) -> Result<WeightVector<T>> {
    if k < 2 {
        return invalid("truncation K must be at least 2");
    }
    let gammas = arrival_times(k, rng);
    from_arrival_times(zeta, &gammas)
}

/// Monte Carlo estimate of `E Σ v_l²` with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub se: f64,
    pub n_samples: usize,
    /// Average of `tail_mass_estimate` over the draws.
    pub mean_tail_mass: f64,
}

const MOMENT_BATCHES: usize = 20;

pub fn second_moment<T: Real, R: Rng + ?Sized>(
    zeta: ZetaParam<T>,
    k: usize,
    n_samples: usize,
    policy: TailPolicy,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if n_samples < 100 {
        return invalid("second_moment needs at least 100 samples");
    }
    let mut values = Vec::with_capacity(n_samples);
    let mut tails = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let w = sample_pd(zeta, k, rng)?;
        values.push(w.sum_of_squares(policy).as_f64());
        tails.push(w.tail_mass_estimate().as_f64());
    }
    let (estimate, se) = ragged_batch_means(&values, MOMENT_BATCHES);
    Ok(MomentEstimate {
        estimate,
        se,
        n_samples,
        mean_tail_mass: kahan_sum(tails.iter().copied()) / n_samples as f64,
    })
}

/// Batch means over `b` contiguous batches whose sizes differ by at most one.
fn ragged_batch_means(values: &[f64], b: usize) -> (f64, f64) {
    let n = values.len();
    let mut means = Vec::with_capacity(b);
    let mut sizes = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let end = (i + 1) * n / b;
        let chunk = &values[start..end];
        means.push(kahan_sum(chunk.iter().copied()) / chunk.len() as f64);
        sizes.push(chunk.len() as f64);
        start = end;
    }
    let mean = kahan_sum(values.iter().copied()) / n as f64;
    // weighted variance of the batch means around the grand mean
    let avg_size = n as f64 / b as f64;
    let ss = kahan_sum(
        means
            .iter()
            .zip(&sizes)
            .map(|(m, s)| (s / avg_size) * (m - mean) * (m - mean)),
    );
    let var = ss / (b as f64 - 1.0);
    (mean, (var / b as f64).sqrt())
}
