//! Perturbation functionals `F`, `F_l`, `F̄` and the group densities `Z^p`.

use super::step::OverlapFn;
use crate::error::{invalid, Result};
use crate::measure::{DiscreteLaw, GibbsMeasure, OverlapMatrix, Point};
use crate::numeric::weighted_log_sum_exp;
use crate::real::Real;

/// `f_1, …, f_n` together with their integrals `∫ f_l dμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily<T> {
    f: Vec<OverlapFn<T>>,
    mu_integrals: Vec<T>,
}

impl<T: Real> FunctionFamily<T> {
    pub fn new(f: Vec<OverlapFn<T>>, mu: &DiscreteLaw<T>) -> Self {
        let mu_integrals = f.iter().map(|g| g.integrate(mu)).collect();
        Self { f, mu_integrals }
    }

    pub fn with_integrals(f: Vec<OverlapFn<T>>, mu_integrals: Vec<T>) -> Result<Self> {
        if f.len() != mu_integrals.len() {
            return invalid("one integral per function is required");
        }
        Ok(Self { f, mu_integrals })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            f: vec![OverlapFn::zero(); n],
            mu_integrals: vec![T::zero(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn functions(&self) -> &[OverlapFn<T>] {
        &self.f
    }

    pub fn mu_integrals(&self) -> &[T] {
        &self.mu_integrals
    }

    /// Same functions with integrals taken against another law.
    pub fn recompute(&self, mu: &DiscreteLaw<T>) -> Self {
        Self::new(self.f.clone(), mu)
    }

    /// `t · f_l` for every `l`.
    pub fn scaled(&self, t: T) -> Self {
        Self {
            f: self.f.iter().map(|g| g.scaled(t)).collect(),
            mu_integrals: self.mu_integrals.iter().map(|&v| v * t).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().all(OverlapFn::is_zero)
    }

    /// `Σ_l |f_l|_∞`.
    pub fn bound(&self) -> T {
        self.f.iter().map(OverlapFn::bound).sum()
    }

    /// `f_1(σ·σ^1) + … + f_k(σ·σ^k)`.
    #[inline]
    pub fn eval_prefix<M: GibbsMeasure<T>>(&self, k: usize, measure: &M, sigma: Point, tuple: &[Point]) -> T {
        let mut s = T::zero();
        for (g, &p) in self.f[..k].iter().zip(tuple) {
            s = s + g.eval(measure.overlap(sigma, p));
        }
        s
    }

    /// `F(σ, σ^1, …, σ^n)`.
    pub fn eval_f<M: GibbsMeasure<T>>(&self, measure: &M, sigma: Point, tuple: &[Point]) -> T {
        debug_assert!(tuple.len() >= self.n());
        self.eval_prefix(self.n(), measure, sigma, tuple)
    }

    /// `F_l(σ, σ^1, …, σ^n)` for 1-based `l`; equal to `F` for `l > n`.
    pub fn eval_f_l<M: GibbsMeasure<T>>(&self, measure: &M, l: usize, sigma: Point, tuple: &[Point]) -> T {
        let full = self.eval_f(measure, sigma, tuple);
        if l == 0 || l > self.n() {
            return full;
        }
        let g = &self.f[l - 1];
        full - g.eval(measure.overlap(sigma, tuple[l - 1])) + self.mu_integrals[l - 1]
    }

    /// `F̄ = F − (1/n) Σ_l F_l(σ^l, …)`.
    pub fn eval_fbar<M: GibbsMeasure<T>>(&self, measure: &M, sigma: Point, tuple: &[Point]) -> T {
        let n = self.n();
        if n == 0 {
            return T::zero();
        }
        self.eval_f(measure, sigma, tuple) - self.sum_f_l(measure, tuple) / T::from_usize_lossy(n)
    }

    /// `Σ_{l=1}^n F_l(σ^l, σ^1, …, σ^n)`.
    pub fn sum_f_l<M: GibbsMeasure<T>>(&self, measure: &M, tuple: &[Point]) -> T {
        (1..=self.n())
            .map(|l| self.eval_f_l(measure, l, tuple[l - 1], tuple))
            .sum()
    }

    /// `ln ⟨exp F(σ, σ^1, …, σ^k)⟩` over a fresh `σ`, using the first `k`
    /// functions.
    pub fn log_inner_exp_prefix<M: GibbsMeasure<T>>(&self, k: usize, measure: &M, tuple: &[Point]) -> T {
        if self.f[..k].iter().all(OverlapFn::is_zero) {
            return T::zero();
        }
        let vals: Vec<T> = (0..measure.atom_count())
            .map(|a| self.eval_prefix(k, measure, Point::fresh(a), tuple))
            .collect();
        weighted_log_sum_exp(&vals, measure.weights())
    }

    pub fn log_inner_exp<M: GibbsMeasure<T>>(&self, measure: &M, tuple: &[Point]) -> T {
        self.log_inner_exp_prefix(self.n(), measure, tuple)
    }

    /// Log of the density `exp Σ F_l(σ^l, …) / ⟨exp F⟩^n`.
    pub fn log_density<M: GibbsMeasure<T>>(&self, measure: &M, tuple: &[Point]) -> T {
        if self.is_zero() {
            return T::zero();
        }
        self.sum_f_l(measure, tuple) - T::from_usize_lossy(self.n()) * self.log_inner_exp(measure, tuple)
    }
}

/// Product `Π_k g_k(R_{l_k, l'_k})` over a list of replica pairs (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct PairProduct<T> {
    factors: Vec<(usize, usize, OverlapFn<T>)>,
}

impl<T: Real> PairProduct<T> {
    /// The constant `1`.
    pub fn one() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn new(factors: Vec<(usize, usize, OverlapFn<T>)>) -> Result<Self> {
        for (l, lp, _) in &factors {
            if *l == 0 || *lp == 0 || l == lp {
                return invalid(format!("bad replica pair ({l},{lp})"));
            }
        }
        Ok(Self { factors })
    }

    pub fn single(l: usize, lp: usize, g: OverlapFn<T>) -> Result<Self> {
        Self::new(vec![(l, lp, g)])
    }

    pub fn factors(&self) -> &[(usize, usize, OverlapFn<T>)] {
        &self.factors
    }

    /// Largest replica index referenced (0 for the constant).
    pub fn max_index(&self) -> usize {
        self.factors.iter().map(|(a, b, _)| *a.max(b)).max().unwrap_or(0)
    }

    /// Whether every referenced replica lies in `lo..=hi`.
    pub fn within(&self, lo: usize, hi: usize) -> bool {
        self.factors
            .iter()
            .all(|(a, b, _)| (lo..=hi).contains(a) && (lo..=hi).contains(b))
    }

    pub fn eval(&self, r: &OverlapMatrix<T>) -> T {
        self.factors
            .iter()
            .fold(T::one(), |acc, (l, lp, g)| acc * g.eval(r.get(l - 1, lp - 1)))
    }

    /// Evaluates directly from points, without building the full matrix.
    pub fn eval_points<M: GibbsMeasure<T>>(&self, measure: &M, tuple: &[Point]) -> T {
        self.factors.iter().fold(T::one(), |acc, (l, lp, g)| {
            acc * g.eval(measure.overlap(tuple[l - 1], tuple[lp - 1]))
        })
    }
}

/// Consecutive replica groups `I_p = {n_{p-1}+1, …, n_p}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    ends: Vec<usize>,
}

impl Groups {
    /// `ends` = `n_1 < n_2 < … < n_r`.
    pub fn new(ends: Vec<usize>) -> Result<Self> {
        if ends.is_empty() || ends[0] == 0 || ends.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("group ends must be positive and strictly increasing");
        }
        Ok(Self { ends })
    }

    /// Group ends from group sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let ends = sizes
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        if sizes.contains(&0) {
            return invalid("group sizes must be positive");
        }
        Self::new(ends)
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn count(&self) -> usize {
        self.ends.len()
    }

    pub fn total(&self) -> usize {
        self.ends[self.ends.len() - 1]
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// 1-based bounds `(first, last)` of group `p` (0-based).
    pub fn bounds(&self, p: usize) -> (usize, usize) {
        let first = if p == 0 { 1 } else { self.ends[p - 1] + 1 };
        (first, self.ends[p])
    }
}

/// `ln Z^p` for 0-based group `p`: `Σ_{l ∈ I_p} F^p_l(σ^l, …) − |I_p| ln ⟨exp F^p⟩`,
/// where `F^p` uses `f_1, …, f_{n_p}`.
pub fn log_z_p<T: Real, M: GibbsMeasure<T>>(
    family: &FunctionFamily<T>,
    groups: &Groups,
    p: usize,
    measure: &M,
    tuple: &[Point],
) -> T {
    let (first, last) = groups.bounds(p);
    let k = last;
    if family.f[..k].iter().all(OverlapFn::is_zero) {
        return T::zero();
    }
    let mut num = T::zero();
    for l in first..=last {
        let sigma = tuple[l - 1];
        let g = &family.f[l - 1];
        num = num + family.eval_prefix(k, measure, sigma, tuple) - g.eval(measure.overlap(sigma, sigma))
            + family.mu_integrals[l - 1];
    }
    let size = T::from_usize_lossy(last - first + 1);
    num - size * family.log_inner_exp_prefix(k, measure, tuple)
}

/// `Z^p` for 0-based group `p`.
pub fn eval_z_p<T: Real, M: GibbsMeasure<T>>(
    family: &FunctionFamily<T>,
    groups: &Groups,
    p: usize,
    measure: &M,
    tuple: &[Point],
) -> T {
    log_z_p(family, groups, p, measure, tuple).exp()
}

/// `ln (Z^1 ⋯ Z^r)`.
pub fn log_z_product<T: Real, M: GibbsMeasure<T>>(
    family: &FunctionFamily<T>,
    groups: &Groups,
    measure: &M,
    tuple: &[Point],
) -> T {
    (0..groups.count())
        .map(|p| log_z_p(family, groups, p, measure, tuple))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeSpec;
    use crate::finite_oracle::{exact_inner_exp_average, FiniteMeasure};
    use crate::functionals::step::{IntervalSet, StepFunction};
    use crate::mc_engine::derive_stream;
    use approx::assert_abs_diff_eq;

    fn finite() -> FiniteMeasure<f64> {
        FiniteMeasure::new(
            vec![0.2, 0.3, 0.5],
            vec![0.9, 0.3, 0.1, 0.3, 0.8, 0.2, 0.1, 0.2, 1.0],
        )
        .unwrap()
    }

    fn pt(a: u32, tag: u32) -> Point {
        Point { atom: a, tag }
    }

    #[test]
    fn zero_family_is_inert() {
        let m = finite();
        let fam = FunctionFamily::zeros(2);
        let tuple = [pt(0, 0), pt(2, 1)];
        assert_eq!(fam.eval_f(&m, pt(1, 9), &tuple), 0.0);
        assert_eq!(fam.eval_f_l(&m, 1, pt(1, 9), &tuple), 0.0);
        assert_eq!(fam.eval_fbar(&m, pt(1, 9), &tuple), 0.0);
        assert_eq!(fam.log_density(&m, &tuple), 0.0);
    }

    #[test]
    fn single_function_on_its_own_replica() {
        let m = finite();
        let t = 0.7;
        let f = OverlapFn::indicator(IntervalSet::single(0.9), t);
        let fam = FunctionFamily::with_integrals(vec![f], vec![0.0]).unwrap();
        let s = pt(0, 0);
        assert_eq!(fam.eval_f(&m, s, &[s]), t);
    }

    #[test]
    fn f_l_beyond_n_is_f() {
        let m = finite();
        let mu = m.exact_mu();
        let fam = FunctionFamily::new(
            vec![
                OverlapFn::Step(StepFunction::at_least(0.25, 1.0)),
                OverlapFn::Step(StepFunction::below(0.5, -0.4)),
            ],
            &mu,
        );
        let tuple = [pt(0, 0), pt(1, 1)];
        let s = pt(2, 5);
        assert_eq!(fam.eval_f_l(&m, 3, s, &tuple), fam.eval_f(&m, s, &tuple));
        let manual = fam.eval_f(&m, s, &tuple) - fam.functions()[1].eval(m.overlap(s, tuple[1]))
            + fam.mu_integrals()[1];
        assert_eq!(fam.eval_f_l(&m, 2, s, &tuple), manual);
    }

    #[test]
    fn fbar_recomputation() {
        let m = finite();
        let mu = m.exact_mu();
        let c = IntervalSet::at_least(0.25);
        let fam = FunctionFamily::new(
            vec![OverlapFn::indicator(c.clone(), 1.0), OverlapFn::indicator(c, -1.0)],
            &mu,
        );
        let tuple = [pt(1, 0), pt(2, 1)];
        for a in 0..3 {
            let s = Point::fresh(a);
            let mean = (fam.eval_f_l(&m, 1, tuple[0], &tuple) + fam.eval_f_l(&m, 2, tuple[1], &tuple)) / 2.0;
            assert_abs_diff_eq!(fam.eval_fbar(&m, s, &tuple), fam.eval_f(&m, s, &tuple) - mean, epsilon = 1e-15);
        }
    }

    #[test]
    fn one_level_cascade_f_l_example() {
        // n = 1, f = I(x < q*), σ = σ^1: F_1 = μ([-1, q*)) = ζ
        let spec = CascadeSpec::single_level(0.35, 0.0, 1.0, 64).unwrap();
        let m = spec.build(&mut derive_stream(1, 0, 0)).unwrap();
        let fam = FunctionFamily::new(vec![OverlapFn::Step(StepFunction::below(1.0, 1.0))], &spec.exact_mu());
        let s = pt(0, 0);
        assert_abs_diff_eq!(fam.eval_f_l(&m, 1, s, &[s]), 0.35, epsilon = 1e-15);
    }

    #[test]
    fn inner_average_matches_oracle() {
        let m = finite();
        let mu = m.exact_mu();
        let fam = FunctionFamily::new(
            vec![
                OverlapFn::Step(StepFunction::new(vec![-1.0, 0.15, 0.5], vec![0.3, -1.2, 2.0]).unwrap()),
                OverlapFn::indicator(IntervalSet::parse("[0.2,0.3]").unwrap(), 0.8),
            ],
            &mu,
        );
        let tuple = [pt(1, 0), pt(2, 1)];
        let fams = fam.clone();
        let oracle = exact_inner_exp_average(&m, &tuple, |o| {
            fams.functions()[0].eval(o[0]) + fams.functions()[1].eval(o[1])
        });
        let ours = fam.log_inner_exp(&m, &tuple).exp();
        assert!((ours - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn log_space_matches_direct_sum() {
        let m = finite();
        let fam = FunctionFamily::with_integrals(
            vec![OverlapFn::Step(StepFunction::at_least(0.25, 30.0))],
            vec![0.0],
        )
        .unwrap();
        let tuple = [pt(2, 0)];
        let direct: f64 = (0..3)
            .map(|a| m.weights()[a] * fam.eval_f(&m, Point::fresh(a), &tuple).exp())
            .sum();
        let lse = fam.log_inner_exp(&m, &tuple);
        assert!((lse.exp() - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn pair_product() {
        let m = finite();
        let phi = PairProduct::new(vec![
            (1, 2, OverlapFn::Step(StepFunction::at_least(0.25, 2.0))),
            (2, 3, OverlapFn::constant(0.5)),
        ])
        .unwrap();
        let tuple = [pt(0, 0), pt(1, 1), pt(2, 2)];
        let r = m.gram(&tuple);
        assert_eq!(phi.eval(&r), 1.0);
        assert_eq!(phi.eval_points(&m, &tuple), 1.0);
        assert_eq!(phi.max_index(), 3);
        assert!(phi.within(1, 3));
        assert!(!phi.within(2, 3));
        assert!(PairProduct::<f64>::new(vec![(1, 1, OverlapFn::zero())]).is_err());
        assert_eq!(PairProduct::<f64>::one().eval(&r), 1.0);
    }

    #[test]
    fn groups() {
        let g = Groups::from_sizes(&[2, 1, 3]).unwrap();
        assert_eq!(g.ends(), &[2, 3, 6]);
        assert_eq!(g.bounds(0), (1, 2));
        assert_eq!(g.bounds(2), (4, 6));
        assert!(Groups::new(vec![2, 2]).is_err());
        assert!(Groups::from_sizes(&[1, 0]).is_err());
    }

    #[test]
    fn single_group_z_is_density() {
        let m = finite();
        let mu = m.exact_mu();
        let fam = FunctionFamily::new(
            vec![
                OverlapFn::Step(StepFunction::at_least(0.25, 0.6)),
                OverlapFn::Step(StepFunction::below(0.5, -0.3)),
            ],
            &mu,
        );
        let tuple = [pt(0, 0), pt(2, 1)];
        let g = Groups::single(2).unwrap();
        assert_abs_diff_eq!(log_z_product(&fam, &g, &m, &tuple), fam.log_density(&m, &tuple), epsilon = 1e-13);
    }

    #[test]
    fn zero_second_group_reduces_to_first() {
        let m = finite();
        let mu = m.exact_mu();
        let f1 = OverlapFn::Step(StepFunction::at_least(0.25, 0.6));
        let fam2 = FunctionFamily::new(vec![f1.clone(), OverlapFn::zero()], &mu);
        let fam1 = FunctionFamily::new(vec![f1], &mu);
        let g = Groups::new(vec![1, 2]).unwrap();
        let tuple = [pt(1, 0), pt(2, 1)];
        let z2 = log_z_p(&fam2, &g, 1, &m, &tuple);
        // Z^2 still carries f_1 in F^2; it is 1 only when f_1 vanishes too
        let zero = FunctionFamily::zeros(2);
        assert_eq!(log_z_p(&zero, &g, 1, &m, &tuple), 0.0);
        assert_abs_diff_eq!(
            log_z_p(&fam2, &g, 0, &m, &tuple),
            fam1.log_density(&m, &tuple[..1]),
            epsilon = 1e-13
        );
        assert!(z2.is_finite());
    }
}
