//! Small explicit measures and exact enumeration of their Gibbs averages.

use crate::error::{invalid, Error, Result};
use crate::measure::{cumulative_of, DiscreteLaw, GibbsMeasure, OverlapMatrix, Point};
use crate::numeric::{kahan_sum, log_sum_exp, KahanSum};
use crate::real::Real;
use std::path::Path;

/// Default cap on the number of enumerated replica tuples.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A measure with `m` atoms given by their weights and Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure<T> {
    weights: Vec<T>,
    gram: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> FiniteMeasure<T> {
    /// `gram` is row-major `m × m`.
    pub fn new(weights: Vec<T>, gram: Vec<T>) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return invalid("a finite measure needs at least one atom");
        }
        if gram.len() != m * m {
            return invalid(format!("gram has {} entries, expected {}", gram.len(), m * m));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return invalid("weights must be positive and finite");
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        for i in 0..m {
            for j in 0..m {
                let g = gram[i * m + j];
                if !g.is_finite() || g.abs() > T::one() {
                    return invalid(format!("gram entry ({i},{j}) = {g} outside [-1, 1]"));
                }
                if g != gram[j * m + i] {
                    return invalid(format!("gram is not symmetric at ({i},{j})"));
                }
            }
        }
        let cumulative = cumulative_of(&weights);
        Ok(Self {
            weights,
            gram,
            cumulative,
        })
    }

    /// Normalizes positive `raw` weights before validation.
    pub fn from_unnormalized(raw: Vec<T>, gram: Vec<T>) -> Result<Self> {
        let total = kahan_sum(raw.iter().copied());
        if !(total > T::zero()) {
            return invalid("weights must have positive total");
        }
        Self::new(raw.into_iter().map(|w| w / total).collect(), gram)
    }

    /// Atoms forming an orthonormal family (identity Gram matrix).
    pub fn orthonormal(weights: Vec<T>) -> Result<Self> {
        let m = weights.len();
        let gram = (0..m * m)
            .map(|k| if k / m == k % m { T::one() } else { T::zero() })
            .collect();
        Self::new(weights, gram)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn gram_entry(&self, a: usize, b: usize) -> T {
        self.gram[a * self.len() + b]
    }

    /// Overlap law of two replicas, exact.
    pub fn exact_mu(&self) -> DiscreteLaw<T> {
        let m = self.len();
        let mut pairs: Vec<(T, T)> = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                pairs.push((self.gram_entry(a, b), self.weights[a] * self.weights[b]));
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite gram"));
        let mut points: Vec<T> = Vec::new();
        let mut masses: Vec<KahanSum<T>> = Vec::new();
        for (x, w) in pairs {
            if points.last() != Some(&x) {
                points.push(x);
                masses.push(KahanSum::new());
            }
            masses.last_mut().expect("pushed above").add(w);
        }
        DiscreteLaw::new(points, masses.iter().map(KahanSum::total).collect())
    }

    /// Parses the text format: first line the weights, then one line per Gram
    /// row. Fields are separated by whitespace or commas; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map(T::lit)
                            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
                    })
                    .collect::<Result<Vec<T>>>()
            });
        let weights = rows
            .next()
            .ok_or_else(|| Error::Parse("empty measure file".into()))??;
        let m = weights.len();
        let mut gram = Vec::with_capacity(m * m);
        for i in 0..m {
            let row = rows
                .next()
                .ok_or_else(|| Error::Parse(format!("missing gram row {}", i + 1)))??;
            if row.len() != m {
                return Err(Error::Parse(format!(
                    "gram row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            gram.extend(row);
        }
        if rows.next().is_some() {
            return Err(Error::Parse("trailing rows after the gram matrix".into()));
        }
        Self::from_unnormalized(weights, gram)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl<T: Real> GibbsMeasure<T> for FiniteMeasure<T> {
    fn weights(&self) -> &[T] {
        &self.weights
    }

    fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    fn is_diffuse(&self, _atom: usize) -> bool {
        false
    }

    fn self_overlap(&self, atom: usize) -> T {
        self.gram_entry(atom, atom)
    }

    fn cross_overlap(&self, a: usize, b: usize) -> T {
        self.gram_entry(a, b)
    }
}

/// Calls `visit(tuple, weight)` for every `n`-tuple of atoms in lexicographic
/// order, where `weight` is the product of the atom weights.
pub fn for_each_tuple<T: Real>(
    measure: &FiniteMeasure<T>,
    n: usize,
    budget: u64,
    mut visit: impl FnMut(&[Point], T),
) -> Result<()> {
    let m = measure.len();
    let count = (m as u64).checked_pow(n as u32);
    match count {
        Some(c) if c <= budget => {}
        _ => {
            return Err(Error::ResourceLimit(format!(
                "{m}^{n} tuples exceed the enumeration budget of {budget}"
            )))
        }
    }
    let mut idx = vec![0usize; n];
    let mut pts: Vec<Point> = (0..n).map(|l| Point { atom: 0, tag: l as u32 }).collect();
    loop {
        let w = idx
            .iter()
            .fold(T::one(), |acc, &a| acc * measure.weights[a]);
        visit(&pts, w);
        // odometer increment, last coordinate fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m {
                pts[k].atom = idx[k] as u32;
                break;
            }
            idx[k] = 0;
            pts[k].atom = 0;
        }
    }
}

/// `⟨functional(R^n)⟩` by enumeration of all `m^n` tuples.
pub fn exact_average<T: Real>(
    measure: &FiniteMeasure<T>,
    n: usize,
    functional: impl Fn(&OverlapMatrix<T>) -> T,
) -> Result<T> {
    exact_average_with_budget(measure, n, DEFAULT_BUDGET, functional)
}

pub fn exact_average_with_budget<T: Real>(
    measure: &FiniteMeasure<T>,
    n: usize,
    budget: u64,
    functional: impl Fn(&OverlapMatrix<T>) -> T,
) -> Result<T> {
    let mut acc = KahanSum::new();
    for_each_tuple(measure, n, budget, |pts, w| {
        acc.add(w * functional(&measure.gram(pts)));
    })?;
    Ok(acc.total())
}

/// Like [`exact_average`] but the functional sees the replica points, for
/// quantities that also need inner averages over the measure.
pub fn exact_tuple_average<T: Real>(
    measure: &FiniteMeasure<T>,
    n: usize,
    functional: impl Fn(&[Point]) -> T,
) -> Result<T> {
    let mut acc = KahanSum::new();
    for_each_tuple(measure, n, DEFAULT_BUDGET, |pts, w| acc.add(w * functional(pts)))?;
    Ok(acc.total())
}

/// `⟨exp F(σ, σ^1, …, σ^n)⟩` over a fresh `σ` for a fixed tuple, where
/// `log_integrand(overlaps)` returns `F` given `(σ·σ^l)_l`.
pub fn exact_inner_exp_average<T: Real>(
    measure: &FiniteMeasure<T>,
    tuple: &[Point],
    log_integrand: impl Fn(&[T]) -> T,
) -> T {
    let m = measure.len();
    let mut overlaps = vec![T::zero(); tuple.len()];
    let mut terms = Vec::with_capacity(m);
    for a in 0..m {
        for (o, p) in overlaps.iter_mut().zip(tuple) {
            *o = measure.gram_entry(a, p.atom as usize);
        }
        terms.push(measure.weights[a].ln() + log_integrand(&overlaps));
    }
    log_sum_exp(&terms).exp()
}
