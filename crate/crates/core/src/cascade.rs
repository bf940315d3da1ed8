//! Finite-depth Ruelle probability cascades.
//!
//! Level-`p` node values of a cascade are products `x = u^{(1)} ⋯ u^{(p)}` of
//! Poisson points. Given all level-`(p-1)` values, the level-`p` values form a
//! Poisson process with intensity `Λ_p y^{-1-ζ_p} dy`, `Λ_p = Σ x^{ζ_p}` over
//! level-`(p-1)` nodes, and each point picks its parent independently with
//! probability `x^{ζ_p} / Λ_p`. The construction keeps the `K_p` largest
//! values of every level. Under [`TailPolicy::Diffuse`] the nodes below the
//! cut enter through their expected contributions: the missing part of `Λ_p`
//! becomes a "fresh parent" option, and the missing leaf mass becomes diffuse
//! atoms attached to the explicit node where their ancestry leaves the
//! explicit tree.
//!
//! Atoms are represented by tree paths only; the overlap of two distinct
//! points is `q_{|α ∧ β|}` and every point has self-overlap `q_r`.

use crate::error::{invalid, Error, Result};
use crate::mc_engine::{batch_means, run_samples, EstimatorConfig};
use crate::measure::{cumulative_of, DiscreteLaw, GibbsMeasure};
use crate::numeric::{kahan_sum, log_sum_exp};
use crate::pd_core::{arrival_times, log_points, log_tail_mass, TailPolicy, ZetaParam};
use crate::real::Real;
use rand::Rng;
use serde::Serialize;

pub const DEFAULT_LEAF_BUDGET: usize = 4096;
/// Explicit node count used for the inner levels when none is given.
pub const DEFAULT_INNER_BRANCHING: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSpec<T> {
    zetas: Vec<T>,
    qs: Vec<T>,
    branching: Vec<usize>,
    leaf_budget: usize,
    tail: TailPolicy,
}

impl<T: Real> CascadeSpec<T> {
    /// `zetas` = ζ_1 < … < ζ_r, `qs` = q_0 < … < q_r, `branching[p]` = number
    /// of explicit nodes kept at level `p + 1` (the last entry is the leaf count).
    pub fn new(zetas: Vec<T>, qs: Vec<T>, branching: Vec<usize>) -> Result<Self> {
        let spec = Self {
            zetas,
            qs,
            branching,
            leaf_budget: DEFAULT_LEAF_BUDGET,
            tail: TailPolicy::Diffuse,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default branching: [`DEFAULT_INNER_BRANCHING`] inner nodes per level and
    /// `leaves` leaves.
    pub fn with_default_branching(zetas: Vec<T>, qs: Vec<T>, leaves: usize) -> Result<Self> {
        let r = zetas.len();
        let mut branching = vec![DEFAULT_INNER_BRANCHING.min(leaves); r];
        if r > 0 {
            branching[r - 1] = leaves;
        }
        Self::new(zetas, qs, branching)
    }

    /// One level: PD(ζ) weights on points with mutual overlap `q0` and
    /// self-overlap `q1`.
    pub fn single_level(zeta: T, q0: T, q1: T, k: usize) -> Result<Self> {
        Self::new(vec![zeta], vec![q0, q1], vec![k])
    }

    pub fn with_leaf_budget(mut self, budget: usize) -> Result<Self> {
        self.leaf_budget = budget;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tail(mut self, tail: TailPolicy) -> Self {
        self.tail = tail;
        self
    }

    pub fn depth(&self) -> usize {
        self.zetas.len()
    }

    pub fn zetas(&self) -> &[T] {
        &self.zetas
    }

    pub fn qs(&self) -> &[T] {
        &self.qs
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn leaf_budget(&self) -> usize {
        self.leaf_budget
    }

    pub fn tail(&self) -> TailPolicy {
        self.tail
    }

    /// Largest overlap value `q* = q_r`.
    pub fn q_star(&self) -> T {
        self.qs[self.qs.len() - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.zetas.len();
        if r == 0 {
            return invalid("cascade depth must be at least 1");
        }
        for z in &self.zetas {
            ZetaParam::new(*z)?;
        }
        if self.zetas.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("zetas must be strictly increasing");
        }
        if self.qs.len() != r + 1 {
            return invalid(format!("expected {} overlap levels, got {}", r + 1, self.qs.len()));
        }
        if self.qs.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("overlap levels must be strictly increasing");
        }
        if self.qs[0] < T::zero() || self.qs[r] > T::one() {
            return invalid("overlap levels must lie in [0, 1]");
        }
        if self.branching.len() != r {
            return invalid(format!("expected {} branching entries, got {}", r, self.branching.len()));
        }
        if self.branching.contains(&0) || self.branching[r - 1] < 2 {
            return invalid("branching entries must be positive and the leaf count at least 2");
        }
        if self.branching[r - 1] > self.leaf_budget {
            return Err(Error::ResourceLimit(format!(
                "{} leaves exceed the leaf budget of {}",
                self.branching[r - 1],
                self.leaf_budget
            )));
        }
        Ok(())
    }

    /// Exact overlap law of the untruncated cascade:
    /// `μ{q_0} = ζ_1`, `μ{q_p} = ζ_{p+1} - ζ_p`, `μ{q_r} = 1 - ζ_r`.
    pub fn exact_mu(&self) -> DiscreteLaw<T> {
        let r = self.depth();
        let mut masses = Vec::with_capacity(r + 1);
        masses.push(self.zetas[0]);
        for p in 1..r {
            masses.push(self.zetas[p] - self.zetas[p - 1]);
        }
        masses.push(T::one() - self.zetas[r - 1]);
        DiscreteLaw::new(self.qs.clone(), masses)
    }

    /// Samples one realization.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CascadeMeasure<T>> {
        build_cascade(self, rng)
    }
}

/// Node bookkeeping for one level: parent ids (into the previous level) of
/// explicit nodes followed by fresh nodes created on demand.
#[derive(Debug)]
struct Level<T> {
    parents: Vec<u32>,
    /// ln of the marks of the fresh nodes, in creation order.
    fresh_marks: Vec<T>,
}

/// One sampled cascade realization.
#[derive(Debug, Clone)]
pub struct CascadeMeasure<T> {
    spec: CascadeSpec<T>,
    weights: Vec<T>,
    cumulative: Vec<T>,
    /// Flattened paths, stride `depth`; only the first `depths[a]` ids of atom
    /// `a` are meaningful.
    paths: Vec<u32>,
    depths: Vec<u8>,
    n_leaves: usize,
}

/// Samples a cascade realization from `spec`.
pub fn build_cascade<T: Real, R: Rng + ?Sized>(
    spec: &CascadeSpec<T>,
    rng: &mut R,
) -> Result<CascadeMeasure<T>> {
    spec.validate()?;
    let r = spec.depth();
    let diffuse = spec.tail == TailPolicy::Diffuse;
    let zetas: Vec<ZetaParam<T>> = spec
        .zetas
        .iter()
        .map(|&z| ZetaParam::new(z))
        .collect::<Result<_>>()?;

    // log node values of explicit nodes per level
    let mut log_values: Vec<Vec<T>> = Vec::with_capacity(r);
    // per level p (0-based): ln of the explicit parent marks and of the fresh-parent mark
    let mut log_marks: Vec<Vec<T>> = Vec::with_capacity(r);
    let mut log_fresh_mark: Vec<T> = Vec::with_capacity(r);
    let mut log_intensity: Vec<T> = Vec::with_capacity(r);
    let mut levels: Vec<Level<T>> = (0..r)
        .map(|_| Level { parents: Vec::new(), fresh_marks: Vec::new() })
        .collect();

    for p in 0..r {
        let z = zetas[p].get();
        let (lam, marks, fresh) = if p == 0 {
            (T::zero(), Vec::new(), T::neg_infinity())
        } else {
            let prev = &log_values[p - 1];
            let marks: Vec<T> = prev.iter().map(|&lx| z * lx).collect();
            let fresh = if diffuse {
                // Λ_{p-1} y_K^{ζ_p - ζ_{p-1}} / (ζ_p - ζ_{p-1})
                let dz = z - zetas[p - 1].get();
                log_intensity[p - 1] + dz * prev[prev.len() - 1] - dz.ln()
            } else {
                T::neg_infinity()
            };
            let mut all = marks.clone();
            all.push(fresh);
            (log_sum_exp(&all), marks, fresh)
        };
        let k = spec.branching[p];
        let gammas: Vec<T> = arrival_times(k, rng);
        let lv = log_points(zetas[p], lam, &gammas);

        if p > 0 {
            let probs: Vec<T> = marks.iter().map(|&m| (m - lam).exp()).collect();
            let fresh_p = (fresh - lam).exp();
            let mut choice: Vec<T> = probs.clone();
            choice.push(fresh_p);
            let cum = cumulative_of(&choice);
            let parents: Vec<u32> = (0..k)
                .map(|_| {
                    let idx = draw(&cum, rng);
                    if idx < marks.len() {
                        idx as u32
                    } else {
                        let ctx = FreshContext {
                            zetas: &zetas,
                            log_values: &log_values,
                            log_marks: &log_marks,
                            log_fresh_mark: &log_fresh_mark,
                            log_intensity: &log_intensity,
                        };
                        spawn_fresh(&mut levels, &ctx, p - 1, rng)
                    }
                })
                .collect();
            levels[p].parents = parents;
        } else {
            levels[0].parents = vec![0; k];
        }
        log_values.push(lv);
        log_marks.push(marks);
        log_fresh_mark.push(fresh);
        log_intensity.push(lam);
    }

    // explicit leaves
    let leaf_logs = &log_values[r - 1];
    let n_leaves = leaf_logs.len();
    let mut atom_logs: Vec<T> = leaf_logs.clone();
    let mut paths: Vec<u32> = Vec::with_capacity(n_leaves * r);
    let mut depths: Vec<u8> = Vec::with_capacity(n_leaves);
    for leaf in 0..n_leaves {
        push_path(&levels, r, r - 1, leaf as u32, &mut paths);
        depths.push(r as u8);
    }

    if diffuse {
        // pool_r = leaf dust; walk up distributing it over explicit ancestors
        let zr = zetas[r - 1];
        let mut log_pool = log_tail_mass(zr, log_intensity[r - 1], leaf_logs[n_leaves - 1]);
        for p in (0..r).rev() {
            let lam = log_intensity[p];
            if p == 0 {
                atom_logs.push(log_pool);
                paths.extend(std::iter::repeat_n(0, r));
                depths.push(0);
            } else {
                let marks = log_marks[p].iter().chain(&levels[p - 1].fresh_marks);
                for (b, &m) in marks.enumerate() {
                    atom_logs.push(log_pool + m - lam);
                    push_path(&levels, r, p - 1, b as u32, &mut paths);
                    depths.push(p as u8);
                }
                // the fresh nodes made explicit take their share out of the aggregate
                let taken = kahan_sum(levels[p - 1].fresh_marks.iter().map(|&m| m.exp()));
                let rest = log_fresh_mark[p].exp() - taken;
                let rest = if rest > T::zero() { rest.ln() } else { T::neg_infinity() };
                log_pool = log_pool + rest - lam;
            }
        }
    }

    let lse = log_sum_exp(&atom_logs);
    let mut weights: Vec<T> = atom_logs.iter().map(|&l| (l - lse).exp()).collect();
    // drop diffuse atoms that underflowed
    let mut keep = vec![true; weights.len()];
    for a in n_leaves..weights.len() {
        keep[a] = weights[a] > T::zero();
    }
    if keep.iter().any(|k| !k) {
        let mut w2 = Vec::new();
        let mut p2 = Vec::new();
        let mut d2 = Vec::new();
        for a in 0..weights.len() {
            if keep[a] {
                w2.push(weights[a]);
                p2.extend_from_slice(&paths[a * r..(a + 1) * r]);
                d2.push(depths[a]);
            }
        }
        weights = w2;
        paths = p2;
        depths = d2;
    }
    let tiny = T::min_positive_value();
    for w in weights.iter_mut().take(n_leaves) {
        *w = w.max(tiny);
    }
    let total = kahan_sum(weights.iter().copied());
    for w in weights.iter_mut() {
        *w = *w / total;
    }
    let cumulative = cumulative_of(&weights);
    Ok(CascadeMeasure {
        spec: spec.clone(),
        weights,
        cumulative,
        paths,
        depths,
        n_leaves,
    })
}

fn draw<T: Real, R: Rng + ?Sized>(cum: &[T], rng: &mut R) -> usize {
    let total = cum[cum.len() - 1];
    let u = T::lit(rng.random::<f64>()) * total;
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

struct FreshContext<'a, T> {
    zetas: &'a [ZetaParam<T>],
    log_values: &'a [Vec<T>],
    log_marks: &'a [Vec<T>],
    log_fresh_mark: &'a [T],
    log_intensity: &'a [T],
}

/// Creates a fresh node at `level` (0-based) and returns its id. Its value
/// is drawn below the level cut with density `∝ x^{ζ_{level+1} − ζ_level − 1}`
/// and its parent from the parent-mark distribution of that level.
fn spawn_fresh<T: Real, R: Rng + ?Sized>(
    levels: &mut [Level<T>],
    ctx: &FreshContext<'_, T>,
    level: usize,
    rng: &mut R,
) -> u32 {
    let z_child = ctx.zetas[level + 1].get();
    let dz = z_child - ctx.zetas[level].get();
    let cut = ctx.log_values[level][ctx.log_values[level].len() - 1];
    let u = T::lit(1.0 - rng.random::<f64>());
    let log_value = cut + u.ln() / dz;
    let parent = if level == 0 {
        0
    } else {
        let lam = ctx.log_intensity[level];
        let mut probs: Vec<T> = ctx.log_marks[level].iter().map(|&m| (m - lam).exp()).collect();
        probs.push((ctx.log_fresh_mark[level] - lam).exp());
        let cum = cumulative_of(&probs);
        let idx = draw(&cum, rng);
        if idx < ctx.log_marks[level].len() {
            idx as u32
        } else {
            spawn_fresh(levels, ctx, level - 1, rng)
        }
    };
    levels[level].parents.push(parent);
    levels[level].fresh_marks.push(z_child * log_value);
    (levels[level].parents.len() - 1) as u32
}

/// Appends the ids of `node` (at 0-based `level`) and its ancestors as a
/// stride-`r` path; unused trailing slots are zero.
fn push_path<T>(levels: &[Level<T>], r: usize, level: usize, node: u32, out: &mut Vec<u32>) {
    let start = out.len();
    out.extend(std::iter::repeat_n(0, r));
    let mut id = node;
    let mut p = level as isize;
    while p >= 0 {
        out[start + p as usize] = id;
        id = levels[p as usize].parents[id as usize];
        p -= 1;
    }
}

impl<T: Real> CascadeMeasure<T> {
    pub fn spec(&self) -> &CascadeSpec<T> {
        &self.spec
    }

    /// Number of explicit leaves; they are atoms `0..n_leaves` in
    /// nonincreasing weight order.
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn leaf_weights(&self) -> &[T] {
        &self.weights[..self.n_leaves]
    }

    /// Total weight of diffuse atoms.
    pub fn diffuse_mass(&self) -> T {
        kahan_sum(self.weights[self.n_leaves..].iter().copied())
    }

    /// Tree path of an atom (length = its depth).
    pub fn path(&self, atom: usize) -> &[u32] {
        let r = self.spec.depth();
        &self.paths[atom * r..atom * r + self.depths[atom] as usize]
    }

    pub fn depth_of(&self, atom: usize) -> usize {
        self.depths[atom] as usize
    }

    /// Common-prefix length of two atom paths.
    #[inline]
    pub fn common_prefix(&self, a: usize, b: usize) -> usize {
        let r = self.spec.depth();
        let d = self.depths[a].min(self.depths[b]) as usize;
        let pa = &self.paths[a * r..a * r + r];
        let pb = &self.paths[b * r..b * r + r];
        (1..=d).rev().find(|&p| pa[p - 1] == pb[p - 1]).unwrap_or(0)
    }

    /// Moves the second-heaviest leaf under the parent of the heaviest one
    /// whenever the heaviest leaf carries at least `threshold` of the mass.
    /// This couples the tree pattern of the top leaves to their weights and is
    /// used as a negative control for the independence test.
    pub fn force_heavy_pair_share_branch(&mut self, threshold: T) {
        let r = self.spec.depth();
        if r < 2 || self.n_leaves < 2 || self.weights[0] < threshold {
            return;
        }
        for p in 0..r - 1 {
            self.paths[r + p] = self.paths[p];
        }
    }
}

impl<T: Real> GibbsMeasure<T> for CascadeMeasure<T> {
    fn weights(&self) -> &[T] {
        &self.weights
    }

    fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    fn is_diffuse(&self, atom: usize) -> bool {
        atom >= self.n_leaves
    }

    fn self_overlap(&self, _atom: usize) -> T {
        self.spec.q_star()
    }

    #[inline]
    fn cross_overlap(&self, a: usize, b: usize) -> T {
        self.spec.qs[self.common_prefix(a, b)]
    }
}

/// Monte Carlo estimate of the overlap law `μ` over `{q_0, …, q_r}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapLaw {
    pub qs: Vec<f64>,
    pub masses: Vec<f64>,
    pub ses: Vec<f64>,
    pub n_samples: usize,
}

impl OverlapLaw {
    pub fn to_law(&self) -> DiscreteLaw<f64> {
        DiscreteLaw::new(self.qs.clone(), self.masses.clone())
    }
}

/// Estimates `μ` with one fresh cascade and one replica pair per outer sample
/// (`config.n_outer` samples, at least 1000).
pub fn overlap_law(spec: &CascadeSpec<f64>, config: &EstimatorConfig) -> Result<OverlapLaw> {
    if config.n_outer < 1000 {
        return invalid("overlap_law needs at least 1000 samples");
    }
    let r = spec.depth();
    let levels = run_samples(config, |_, s| -> Result<usize> {
        let m = spec.build(s)?;
        let pts = m.sample_replicas(2, s);
        let level = if m.same_point(pts[0], pts[1]) {
            r
        } else {
            m.common_prefix(pts[0].atom as usize, pts[1].atom as usize)
        };
        Ok(level)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut masses = Vec::with_capacity(r + 1);
    let mut ses = Vec::with_capacity(r + 1);
    for p in 0..=r {
        let ind: Vec<f64> = levels.iter().map(|&l| (l == p) as u8 as f64).collect();
        let e = batch_means(&ind, config.n_batches);
        masses.push(e.mean);
        ses.push(e.se);
    }
    Ok(OverlapLaw {
        qs: spec.qs().to_vec(),
        masses,
        ses,
        n_samples: levels.len(),
    })
}
