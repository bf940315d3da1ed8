//! Bounded piecewise-constant functions of one overlap value.

use crate::error::{invalid, Error, Result};
use crate::measure::DiscreteLaw;
use crate::real::Real;
use std::fmt;

/// Right-continuous step function on `[-1, 1]` with cells `[b_i, b_{i+1})`;
/// the last cell is `[b_last, 1]`. Values below `-1` use the first cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    breaks: Vec<T>,
    vals: Vec<T>,
}

impl<T: Real> StepFunction<T> {
    /// `breaks[0]` must be `-1`; breaks strictly increasing within `[-1, 1]`.
    pub fn new(breaks: Vec<T>, vals: Vec<T>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != vals.len() {
            return invalid("a step function needs one value per break");
        }
        if breaks[0] != -T::one() {
            return invalid("the first break must be -1");
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("breaks must be strictly increasing");
        }
        if breaks.iter().any(|b| *b > T::one()) {
            return invalid("breaks must lie in [-1, 1]");
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return invalid("step values must be finite");
        }
        Ok(Self { breaks, vals })
    }

    pub fn constant(c: T) -> Self {
        Self {
            breaks: vec![-T::one()],
            vals: vec![c],
        }
    }

    /// `c · I(x ≥ q)`.
    pub fn at_least(q: T, c: T) -> Self {
        if q <= -T::one() {
            Self::constant(c)
        } else {
            Self {
                breaks: vec![-T::one(), q],
                vals: vec![T::zero(), c],
            }
        }
    }

    /// `c · I(x < q)`.
    pub fn below(q: T, c: T) -> Self {
        if q <= -T::one() {
            Self::constant(T::zero())
        } else {
            Self {
                breaks: vec![-T::one(), q],
                vals: vec![c, T::zero()],
            }
        }
    }

    pub fn breaks(&self) -> &[T] {
        &self.breaks
    }

    pub fn vals(&self) -> &[T] {
        &self.vals
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        let i = self.breaks.partition_point(|&b| b <= x);
        self.vals[i.saturating_sub(1)]
    }

    pub fn bound(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            breaks: self.breaks.clone(),
            vals: self.vals.iter().map(|&v| v * c).collect(),
        }
    }
}

/// One interval with explicit closedness of each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl<T: Real> Interval<T> {
    pub fn closed(lo: T, hi: T) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

/// Finite union of intervals, written like `[0.4,1]` or `[-1,0);(0.2,0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet<T> {
    parts: Vec<Interval<T>>,
}

impl<T: Real> IntervalSet<T> {
    pub fn new(parts: Vec<Interval<T>>) -> Result<Self> {
        if parts.iter().any(|p| !(p.lo <= p.hi)) {
            return invalid("interval bounds out of order");
        }
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    /// `[-1, 1]`.
    pub fn everything() -> Self {
        Self {
            parts: vec![Interval::closed(-T::one(), T::one())],
        }
    }

    /// `[q, 1]`.
    pub fn at_least(q: T) -> Self {
        Self {
            parts: vec![Interval::closed(q, T::one())],
        }
    }

    /// `[-1, q)`.
    pub fn below(q: T) -> Self {
        Self {
            parts: vec![Interval {
                lo: -T::one(),
                hi: q,
                lo_closed: true,
                hi_closed: false,
            }],
        }
    }

    pub fn single(x: T) -> Self {
        Self {
            parts: vec![Interval::closed(x, x)],
        }
    }

    pub fn parts(&self) -> &[Interval<T>] {
        &self.parts
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        self.parts.iter().any(|p| p.contains(x))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = Vec::new();
        for piece in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || Error::Parse(format!("bad interval {piece:?}"));
            let lo_closed = match piece.chars().next() {
                Some('[') => true,
                Some('(') => false,
                _ => return Err(bad()),
            };
            let hi_closed = match piece.chars().last() {
                Some(']') => true,
                Some(')') => false,
                _ => return Err(bad()),
            };
            let inner = &piece[1..piece.len() - 1];
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let num = |s: &str| s.trim().parse::<f64>().map(T::lit).map_err(|_| bad());
            parts.push(Interval {
                lo: num(a)?,
                hi: num(b)?,
                lo_closed,
                hi_closed,
            });
        }
        Self::new(parts).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Points at which membership in any of `sets` can change, plus one
    /// probe inside every gap between them.
    fn probes(sets: &[&Self]) -> Vec<T> {
        let mut ends: Vec<T> = vec![-T::one(), T::one()];
        for s in sets {
            for p in &s.parts {
                ends.push(p.lo);
                ends.push(p.hi);
            }
        }
        ends.sort_by(|a, b| a.partial_cmp(b).expect("finite bounds"));
        ends.dedup();
        let mut probes = ends.clone();
        for w in ends.windows(2) {
            probes.push((w[0] + w[1]) / T::lit(2.0));
        }
        probes
    }

    /// Whether `self ⊆ other` within `[-1, 1]`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        Self::probes(&[self, other])
            .into_iter()
            .filter(|x| x.abs() <= T::one())
            .all(|x| !self.contains(x) || other.contains(x))
    }

    /// Whether `self ⊆ a ∩ b` within `[-1, 1]`.
    pub fn is_subset_of_both(&self, a: &Self, b: &Self) -> bool {
        self.is_subset_of(a) && self.is_subset_of(b)
    }
}

impl<T: Real> fmt::Display for IntervalSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .parts
            .iter()
            .map(|p| {
                format!(
                    "{}{},{}{}",
                    if p.lo_closed { '[' } else { '(' },
                    p.lo,
                    p.hi,
                    if p.hi_closed { ']' } else { ')' }
                )
            })
            .collect();
        write!(f, "{}", s.join(";"))
    }
}

/// A bounded function of one overlap: a step function, or a two-valued
/// function of set membership.
#[derive(Debug, Clone, PartialEq)]
pub enum OverlapFn<T> {
    Step(StepFunction<T>),
    Set { set: IntervalSet<T>, inside: T, outside: T },
}

impl<T: Real> OverlapFn<T> {
    pub fn zero() -> Self {
        OverlapFn::Step(StepFunction::constant(T::zero()))
    }

    pub fn constant(c: T) -> Self {
        OverlapFn::Step(StepFunction::constant(c))
    }

    /// `c · I(x ∈ set)`.
    pub fn indicator(set: IntervalSet<T>, c: T) -> Self {
        OverlapFn::Set {
            set,
            inside: c,
            outside: T::zero(),
        }
    }

    /// `c · I(x ∉ set)`.
    pub fn outside(set: IntervalSet<T>, c: T) -> Self {
        OverlapFn::Set {
            set,
            inside: T::zero(),
            outside: c,
        }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        match self {
            OverlapFn::Step(s) => s.eval(x),
            OverlapFn::Set {
                set,
                inside,
                outside,
            } => {
                if set.contains(x) {
                    *inside
                } else {
                    *outside
                }
            }
        }
    }

    pub fn bound(&self) -> T {
        match self {
            OverlapFn::Step(s) => s.bound(),
            OverlapFn::Set { inside, outside, .. } => inside.abs().max(outside.abs()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bound() == T::zero()
    }

    pub fn scaled(&self, c: T) -> Self {
        match self {
            OverlapFn::Step(s) => OverlapFn::Step(s.scaled(c)),
            OverlapFn::Set {
                set,
                inside,
                outside,
            } => OverlapFn::Set {
                set: set.clone(),
                inside: *inside * c,
                outside: *outside * c,
            },
        }
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, mu: &DiscreteLaw<T>) -> T {
        mu.integrate(|x| self.eval(x))
    }
}

impl<T: Real> From<StepFunction<T>> for OverlapFn<T> {
    fn from(s: StepFunction<T>) -> Self {
        OverlapFn::Step(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_right_continuous() {
        let f = StepFunction::new(vec![-1.0, 0.0, 0.5], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(-1.0), 1.0);
        assert_eq!(f.eval(-0.1), 1.0);
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(0.4999), 2.0);
        assert_eq!(f.eval(0.5), 3.0);
        assert_eq!(f.eval(1.0), 3.0);
        assert_eq!(f.bound(), 3.0);
    }

    #[test]
    fn complementary_indicators() {
        for q in [-1.0, -0.3, 0.0, 0.4, 1.0] {
            let ge = StepFunction::at_least(q, 1.0);
            let lt = StepFunction::below(q, 1.0);
            for x in [-1.0, -0.5, -0.3, 0.0, 0.2, 0.4, 0.9, 1.0] {
                assert_eq!(ge.eval(x) + lt.eval(x), 1.0);
                assert_eq!(ge.eval(x), (x >= q) as u8 as f64);
            }
        }
    }

    #[test]
    fn step_validation() {
        assert!(StepFunction::new(vec![-0.5], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![-1.0, 0.2, 0.1], vec![1.0, 2.0, 3.0]).is_err());
        assert!(StepFunction::new(vec![-1.0, 1.5], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![-1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![-1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn interval_parsing_and_membership() {
        let s: IntervalSet<f64> = IntervalSet::parse("[-1,0);(0.2,0.5]").unwrap();
        assert!(s.contains(-1.0));
        assert!(!s.contains(0.0));
        assert!(!s.contains(0.2));
        assert!(s.contains(0.5));
        assert_eq!(s.to_string(), "[-1,0);(0.2,0.5]");
        assert!(IntervalSet::<f64>::parse("[0.5,0.2]").is_err());
        assert!(IntervalSet::<f64>::parse("0.2,0.5").is_err());
        assert!(IntervalSet::<f64>::parse("[a,1]").is_err());
    }

    #[test]
    fn subset_relation() {
        let a: IntervalSet<f64> = IntervalSet::parse("[0.4,1]").unwrap();
        let b = IntervalSet::parse("[0.3,1]").unwrap();
        let c = IntervalSet::parse("(0.4,1]").unwrap();
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(!a.is_subset_of(&c));
        assert!(c.is_subset_of(&a));
        assert!(IntervalSet::empty().is_subset_of(&c));
        assert!(a.is_subset_of_both(&b, &IntervalSet::everything()));
    }

    #[test]
    fn integrate_against_law() {
        let mu = DiscreteLaw::new(vec![0.0f64, 0.4, 1.0], vec![0.3, 0.4, 0.3]);
        let f = OverlapFn::indicator(IntervalSet::at_least(0.4), 2.0);
        assert!((f.integrate(&mu) - 1.4).abs() < 1e-15);
        assert!(OverlapFn::<f64>::zero().is_zero());
        assert_eq!(f.scaled(0.5).eval(1.0), 1.0);
    }
}
