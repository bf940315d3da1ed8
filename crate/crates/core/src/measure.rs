//! Discrete random-measure realizations and their replicas.
//!
//! A realization is a finite list of atoms with weights. An atom is either a
//! single point or a *diffuse* class: a continuum of infinitesimal points that
//! all share a tree prefix. Two replicas drawn from the same diffuse class are
//! distinct points almost surely, which is tracked through [`Point::tag`].

use crate::real::Real;
use rand::Rng;

/// One sampled point: an atom plus a tag that distinguishes distinct points
/// drawn from the same diffuse atom. Tags are ignored for point atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub atom: u32,
    pub tag: u32,
}

/// Tag used for the integration variable of inner averages; never assigned
/// to a replica.
pub const FRESH_TAG: u32 = u32::MAX;

impl Point {
    pub fn fresh(atom: usize) -> Self {
        Self {
            atom: atom as u32,
            tag: FRESH_TAG,
        }
    }
}

/// Symmetric array of overlaps `R_{l,l'}` of `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> OverlapMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Zero-based entry `R_{i+1, j+1}`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `Σ_{l,l'} R_{l,l'}`, the squared norm of the sum of the points.
    pub fn total(&self) -> T {
        self.entries.iter().copied().sum()
    }
}

/// One realization of a discrete random measure.
pub trait GibbsMeasure<T: Real>: Sync {
    /// Atom weights; they sum to one.
    fn weights(&self) -> &[T];

    /// Running sums of [`weights`](Self::weights), used for inverse-CDF draws.
    fn cumulative(&self) -> &[T];

    fn is_diffuse(&self, atom: usize) -> bool;

    /// Overlap of a point with itself.
    fn self_overlap(&self, atom: usize) -> T;

    /// Overlap of two distinct points from atoms `a` and `b`
    /// (`a == b` only arises for diffuse atoms).
    fn cross_overlap(&self, a: usize, b: usize) -> T;

    fn atom_count(&self) -> usize {
        self.weights().len()
    }

    fn same_point(&self, p: Point, q: Point) -> bool {
        p.atom == q.atom && (!self.is_diffuse(p.atom as usize) || p.tag == q.tag)
    }

    fn overlap(&self, p: Point, q: Point) -> T {
        if self.same_point(p, q) {
            self.self_overlap(p.atom as usize)
        } else {
            self.cross_overlap(p.atom as usize, q.atom as usize)
        }
    }

    fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let cum = self.cumulative();
        let total = cum[cum.len() - 1];
        let u = T::lit(rng.random::<f64>()) * total;
        let i = cum.partition_point(|&c| c <= u);
        i.min(cum.len() - 1)
    }

    fn sample_point<R: Rng + ?Sized>(&self, tag: u32, rng: &mut R) -> Point {
        Point {
            atom: self.sample_atom(rng) as u32,
            tag,
        }
    }

    /// `n` i.i.d. replicas tagged `0..n`.
    fn sample_replicas<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Point> {
        (0..n).map(|l| self.sample_point(l as u32, rng)).collect()
    }

    fn gram(&self, points: &[Point]) -> OverlapMatrix<T> {
        OverlapMatrix::from_fn(points.len(), |i, j| self.overlap(points[i], points[j]))
    }

    /// Sum of the weights of atoms satisfying `pred`.
    fn mass_where(&self, mut pred: impl FnMut(usize) -> bool) -> T {
        let mut k = crate::numeric::KahanSum::new();
        for (a, &w) in self.weights().iter().enumerate() {
            if pred(a) {
                k.add(w);
            }
        }
        k.total()
    }
}

pub(crate) fn cumulative_of<T: Real>(weights: &[T]) -> Vec<T> {
    let mut acc = crate::numeric::KahanSum::new();
    weights
        .iter()
        .map(|&w| {
            acc.add(w);
            acc.total()
        })
        .collect()
}

/// A discrete probability law on the real line, e.g. the overlap law `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw<T> {
    pub points: Vec<T>,
    pub masses: Vec<T>,
}

impl<T: Real> DiscreteLaw<T> {
    pub fn new(points: Vec<T>, masses: Vec<T>) -> Self {
        assert_eq!(points.len(), masses.len());
        Self { points, masses }
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        crate::numeric::kahan_sum(self.points.iter().zip(&self.masses).map(|(&x, &m)| m * f(x)))
    }

    pub fn mass_where(&self, mut pred: impl FnMut(T) -> bool) -> T {
        self.integrate(|x| if pred(x) { T::one() } else { T::zero() })
    }

    pub fn total(&self) -> T {
        crate::numeric::kahan_sum(self.masses.iter().copied())
    }
}
