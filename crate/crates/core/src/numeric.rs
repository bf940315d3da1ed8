//! Log-space aggregation and compensated summation.

use crate::real::Real;

/// `ln Σ exp(x_i)`; `-inf` for an empty slice or when every term is `-inf`.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln Σ w_i exp(x_i)` for nonnegative weights.
pub fn weighted_log_sum_exp<T: Real>(xs: &[T], weights: &[T]) -> T {
    assert_eq!(xs.len(), weights.len());
    let max = xs
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&x, _)| x)
        .fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let mut acc = KahanSum::new();
    for (&x, &w) in xs.iter().zip(weights) {
        if w > T::zero() {
            acc.add(w * (x - max).exp());
        }
    }
    max + acc.total().ln()
}

/// Neumaier variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum + self.comp
    }
}

pub fn kahan_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut k = KahanSum::new();
    for x in xs {
        k.add(x);
    }
    k.total()
}

/// Normalizes log-weights into probabilities that sum to one.
pub fn normalize_log_weights<T: Real>(log_w: &[T]) -> Vec<T> {
    let lse = log_sum_exp(log_w);
    log_w.iter().map(|&x| (x - lse).exp()).collect()
}
