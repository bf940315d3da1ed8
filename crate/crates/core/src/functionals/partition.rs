//! Partition weights `W_α = G(B_α)` and the maps `T`, `T_t`.
//!
//! Membership partitions index sets by a bitmask `α`: bit `l-1` is set iff
//! `σ·σ^l ∉ B_l`. For `n = 2` the four sets `A_1, …, A_4` correspond to the
//! masks in [`FOUR_SETS`].

use super::family::FunctionFamily;
use super::step::{IntervalSet, OverlapFn};
use crate::error::{invalid, Result};
use crate::measure::{DiscreteLaw, GibbsMeasure, Point};
use crate::numeric::KahanSum;
use crate::real::Real;

/// Bitmasks of `A_1, A_2, A_3, A_4`.
pub const FOUR_SETS: [usize; 4] = [0b10, 0b01, 0b00, 0b11];

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSpec<T> {
    /// One set containing every atom.
    Trivial,
    /// `B_α = {σ : σ·σ^l ∉ B_l ⇔ l ∈ α}` for the given `B_1, …, B_n`.
    Membership(Vec<IntervalSet<T>>),
}

impl<T: Real> PartitionSpec<T> {
    pub fn n_sets(&self) -> usize {
        match self {
            PartitionSpec::Trivial => 1,
            PartitionSpec::Membership(b) => 1 << b.len(),
        }
    }

    /// Number of replicas the partition depends on.
    pub fn arity(&self) -> usize {
        match self {
            PartitionSpec::Trivial => 0,
            PartitionSpec::Membership(b) => b.len(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            PartitionSpec::Membership(b) if b.len() > n => {
                invalid(format!("partition uses {} replicas but only {n} are available", b.len()))
            }
            PartitionSpec::Membership(b) if b.len() > 16 => invalid("at most 16 membership sets"),
            _ => Ok(()),
        }
    }

    /// Index `α` of the set containing `sigma`.
    #[inline]
    pub fn index_of<M: GibbsMeasure<T>>(&self, measure: &M, sigma: Point, tuple: &[Point]) -> usize {
        match self {
            PartitionSpec::Trivial => 0,
            PartitionSpec::Membership(b) => b.iter().enumerate().fold(0, |mask, (l, set)| {
                if set.contains(measure.overlap(sigma, tuple[l])) {
                    mask
                } else {
                    mask | (1 << l)
                }
            }),
        }
    }

    /// `W_α` for every `α`.
    pub fn weights<M: GibbsMeasure<T>>(&self, measure: &M, tuple: &[Point]) -> Vec<T> {
        let mut acc = vec![KahanSum::new(); self.n_sets()];
        for (a, &w) in measure.weights().iter().enumerate() {
            acc[self.index_of(measure, Point::fresh(a), tuple)].add(w);
        }
        acc.iter().map(KahanSum::total).collect()
    }
}

/// Result of the general map `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed<T> {
    /// `T(W)_α = ⟨I_{B_α} exp F⟩ / ⟨exp F⟩`.
    pub weights: Vec<T>,
    /// `ln ⟨exp F⟩`.
    pub log_norm: T,
}

/// General path: inner averages over all atoms, in log space.
pub fn apply_t<T: Real, M: GibbsMeasure<T>>(
    partition: &PartitionSpec<T>,
    family: &FunctionFamily<T>,
    measure: &M,
    tuple: &[Point],
) -> Transformed<T> {
    let atoms = measure.atom_count();
    let mut vals = Vec::with_capacity(atoms);
    let mut idx = Vec::with_capacity(atoms);
    let mut max = T::neg_infinity();
    for a in 0..atoms {
        let s = Point::fresh(a);
        let v = family.eval_f(measure, s, tuple);
        if measure.weights()[a] > T::zero() {
            max = max.max(v);
        }
        vals.push(v);
        idx.push(partition.index_of(measure, s, tuple));
    }
    let mut acc = vec![KahanSum::new(); partition.n_sets()];
    for ((&v, &i), &w) in vals.iter().zip(&idx).zip(measure.weights()) {
        if w > T::zero() {
            acc[i].add(w * (v - max).exp());
        }
    }
    let parts: Vec<T> = acc.iter().map(KahanSum::total).collect();
    let total: T = crate::numeric::kahan_sum(parts.iter().copied());
    Transformed {
        weights: parts.iter().map(|&p| p / total).collect(),
        log_norm: max + total.ln(),
    }
}

/// `t_α = Σ_{l ∈ α} t_l`.
#[inline]
pub fn t_alpha<T: Real>(mask: usize, t: &[T]) -> T {
    t.iter()
        .enumerate()
        .filter(|(l, _)| mask >> l & 1 == 1)
        .fold(T::zero(), |s, (_, &v)| s + v)
}

/// `Δ_t = Σ_α W_α e^{t_α}` with `W` in bitmask order.
pub fn delta_t<T: Real>(w: &[T], t: &[T]) -> T {
    let mut acc = KahanSum::new();
    for (mask, &wa) in w.iter().enumerate() {
        acc.add(wa * t_alpha(mask, t).exp());
    }
    acc.total()
}

/// Closed form `T_t(W)_α = W_α e^{t_α} / Δ_t`.
pub fn transform_t<T: Real>(w: &[T], t: &[T]) -> Vec<T> {
    let d = delta_t(w, t);
    w.iter()
        .enumerate()
        .map(|(mask, &wa)| wa * t_alpha(mask, t).exp() / d)
        .collect()
}

/// `γ_t = Σ_l t_l μ(B_l^c)`.
pub fn gamma_t<T: Real>(t: &[T], sets: &[IntervalSet<T>], mu: &DiscreteLaw<T>) -> T {
    t.iter()
        .zip(sets)
        .map(|(&tl, b)| tl * mu.mass_where(|x| !b.contains(x)))
        .sum()
}

/// The family `f_l = t_l I(x ∉ B_l)`.
pub fn membership_family<T: Real>(t: &[T], sets: &[IntervalSet<T>], mu: &DiscreteLaw<T>) -> FunctionFamily<T> {
    FunctionFamily::new(
        t.iter()
            .zip(sets)
            .map(|(&tl, b)| OverlapFn::outside(b.clone(), tl))
            .collect(),
        mu,
    )
}

/// Reorders bitmask-indexed four-set weights as `(W_1, W_2, W_3, W_4)`.
pub fn to_four_sets<T: Copy>(w: &[T]) -> [T; 4] {
    FOUR_SETS.map(|m| w[m])
}

/// Inverse of [`to_four_sets`].
pub fn from_four_sets<T: Real>(w: [T; 4]) -> Vec<T> {
    let mut out = vec![T::zero(); 4];
    for (k, m) in FOUR_SETS.iter().enumerate() {
        out[*m] = w[k];
    }
    out
}

/// Functions `φ(W)` of the partition weights (bitmask order).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFn<T> {
    One,
    /// `W_α`.
    Component(usize),
    /// `Π_α W_α^{k_α}`.
    Monomial(Vec<u32>),
    /// `(Σ_α c_α W_α)^p`.
    LinearPower { coeffs: Vec<T>, power: T },
    /// `I(W_α = 0)`.
    ZeroIndicator(usize),
}

impl<T: Real> WeightFn<T> {
    pub fn validate(&self, n_sets: usize) -> Result<()> {
        let ok = match self {
            WeightFn::One => true,
            WeightFn::Component(a) | WeightFn::ZeroIndicator(a) => *a < n_sets,
            WeightFn::Monomial(k) => k.len() == n_sets,
            WeightFn::LinearPower { coeffs, power } => coeffs.len() == n_sets && power.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("weight function does not fit a partition with {n_sets} sets"))
        }
    }

    pub fn eval(&self, w: &[T]) -> T {
        match self {
            WeightFn::One => T::one(),
            WeightFn::Component(a) => w[*a],
            WeightFn::Monomial(k) => w
                .iter()
                .zip(k)
                .fold(T::one(), |acc, (&x, &e)| acc * x.powi(e as i32)),
            WeightFn::LinearPower { coeffs, power } => {
                let s: T = w.iter().zip(coeffs).map(|(&x, &c)| x * c).sum();
                s.powf(*power)
            }
            WeightFn::ZeroIndicator(a) => {
                if w[*a] == T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeSpec;
    use crate::finite_oracle::FiniteMeasure;
    use crate::mc_engine::derive_stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pt(a: u32, tag: u32) -> Point {
        Point { atom: a, tag }
    }

    #[test]
    fn trivial_partition() {
        let m = FiniteMeasure::orthonormal(vec![0.25, 0.75]).unwrap();
        let w = PartitionSpec::Trivial.weights(&m, &[pt(0, 0)]);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn four_sets_on_one_level_cascade() {
        let spec = CascadeSpec::single_level(0.5, 0.0, 1.0, 64).unwrap();
        let m = spec.build(&mut derive_stream(2, 0, 0)).unwrap();
        let b = IntervalSet::at_least(1.0);
        let part = PartitionSpec::Membership(vec![b.clone(), b]);
        let s = pt(3, 0);
        let w = to_four_sets(&part.weights(&m, &[s, pt(3, 1)]));
        assert_abs_diff_eq!(w[2], m.weights()[3], epsilon = 1e-15);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[3], 1.0 - m.weights()[3], epsilon = 1e-12);
    }

    #[test]
    fn delta_examples() {
        let w = from_four_sets([0.1, 0.2, 0.3, 0.4]);
        assert_abs_diff_eq!(delta_t(&w, &[2f64.ln(), 0.0]), 1.6, epsilon = 1e-14);
        assert_abs_diff_eq!(delta_t(&w, &[0.0, 0.0]), 1.0, epsilon = 1e-15);
        let w3 = from_four_sets([0.0, 0.0, 1.0, 0.0]);
        assert_eq!(delta_t(&w3, &[0.7, -2.0]), 1.0);
        let mu = DiscreteLaw::new(vec![0.0, 1.0], vec![0.5, 0.5]);
        assert_eq!(gamma_t(&[0.0, 0.0], &[IntervalSet::at_least(1.0), IntervalSet::at_least(1.0)], &mu), 0.0);
    }

    #[test]
    fn general_path_matches_closed_form() {
        let spec = CascadeSpec::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], vec![32, 128]).unwrap();
        let m = spec.build(&mut derive_stream(5, 0, 0)).unwrap();
        let mu = spec.exact_mu();
        let sets = vec![IntervalSet::at_least(0.4), IntervalSet::at_least(1.0)];
        let t = [0.8f64, -0.3];
        let fam = membership_family(&t, &sets, &mu);
        let part = PartitionSpec::Membership(sets);
        let tuple = [pt(0, 0), pt(5, 1)];
        let w = part.weights(&m, &tuple);
        let general = apply_t(&part, &fam, &m, &tuple);
        let closed = transform_t(&w, &t);
        for (a, b) in general.weights.iter().zip(&closed) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(general.log_norm, delta_t(&w, &t).ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_family_is_identity() {
        let spec = CascadeSpec::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], vec![16, 64]).unwrap();
        let m = spec.build(&mut derive_stream(6, 0, 0)).unwrap();
        let part = PartitionSpec::Membership(vec![IntervalSet::at_least(0.4); 2]);
        let tuple = [pt(0, 0), pt(1, 1)];
        let w = part.weights(&m, &tuple);
        let tw = apply_t(&part, &FunctionFamily::zeros(2), &m, &tuple);
        for (a, b) in tw.weights.iter().zip(&w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn weight_functions() {
        let w = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(WeightFn::Component(2).eval(&w), 0.3);
        assert_abs_diff_eq!(WeightFn::Monomial(vec![1, 0, 2, 0]).eval(&w), 0.009, epsilon = 1e-15);
        let lp = WeightFn::LinearPower {
            coeffs: vec![1.0, 1.0, 1.0, 1.0],
            power: -2.0,
        };
        assert_abs_diff_eq!(lp.eval(&w), 1.0, epsilon = 1e-14);
        assert_eq!(WeightFn::ZeroIndicator(0).eval(&[0.0, 1.0]), 1.0);
        assert!(WeightFn::<f64>::Component(4).validate(4).is_err());
        assert!(WeightFn::<f64>::Monomial(vec![1]).validate(4).is_err());
    }

    fn prob_vector(raw: Vec<f64>) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn group_law(raw in prop::collection::vec(0.01f64..1.0, 4),
                     t in prop::collection::vec(-3.0f64..3.0, 2),
                     s in prop::collection::vec(-3.0f64..3.0, 2)) {
            let w = prob_vector(raw);
            let ts: Vec<f64> = t.iter().zip(&s).map(|(a, b)| a + b).collect();
            let lhs = transform_t(&transform_t(&w, &s), &t);
            let rhs = transform_t(&w, &ts);
            for (a, b) in lhs.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let neg: Vec<f64> = t.iter().map(|x| -x).collect();
            let back = transform_t(&transform_t(&w, &t), &neg);
            for (a, b) in back.iter().zip(&w) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn delta_of_inverse(raw in prop::collection::vec(0.01f64..1.0, 8),
                            t in prop::collection::vec(-3.0f64..3.0, 3)) {
            let w = prob_vector(raw);
            let neg: Vec<f64> = t.iter().map(|x| -x).collect();
            let lhs = delta_t(&transform_t(&w, &neg), &t);
            let rhs = 1.0 / delta_t(&w, &neg);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }

        #[test]
        fn transform_is_probability_vector(raw in prop::collection::vec(0.0f64..1.0, 4),
                                           t in prop::collection::vec(-5.0f64..5.0, 2)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-3);
            let w = prob_vector(raw);
            let tw = transform_t(&w, &t);
            prop_assert!(tw.iter().all(|&x| x >= 0.0));
            prop_assert!((tw.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn zero_t_is_identity(raw in prop::collection::vec(0.01f64..1.0, 4)) {
            let w = prob_vector(raw);
            prop_assert_eq!(transform_t(&w, &[0.0, 0.0]), w.iter().map(|x| x / delta_t(&w, &[0.0, 0.0])).collect::<Vec<_>>());
        }
    }
}
