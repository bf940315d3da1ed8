use crate::error::{invalid, Result};
use crate::identity_checks::{IdentityReport, Target};
use crate::mc_engine::{derive_stream, run_samples, EstimatorConfig, AUX_LANE};
use crate::measure::GibbsMeasure;
use rand::seq::SliceRandom;
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::time::Instant;

/// Largest supported number of top atoms.
pub const MAX_TOP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeOptions {
    pub m: usize,
    pub resamples: usize,
    pub alpha: f64,
}

impl ExchangeOptions {
    pub fn new(m: usize) -> Self {
        Self { m, resamples: 1000, alpha: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_TOP).contains(&self.m) {
            return invalid(format!("m must lie in 2..={MAX_TOP}"));
        }
        if self.resamples == 0 {
            return invalid("resamples must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("alpha must lie in (0, 1)");
        }
        Ok(())
    }
}

/// The `m` heaviest explicit atoms, ties broken by index; `None` when fewer
/// than `m` exist.
pub fn top_atoms<M: GibbsMeasure<f64>>(measure: &M, m: usize) -> Option<Vec<usize>> {
    let w = measure.weights();
    let mut idx: Vec<usize> = (0..w.len()).filter(|&a| !measure.is_diffuse(a) && w[a] > 0.0).collect();
    if idx.len() < m {
        return None;
    }
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    idx.truncate(m);
    Some(idx)
}

fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    fn rec(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Upper-triangle key of an `m × m` symmetric pattern relabeled by `perm`.
fn relabel(key: &[u64], m: usize, perm: &[usize]) -> Vec<u64> {
    let mut full = vec![0u64; m * m];
    for (k, (i, j)) in pairs(m).enumerate() {
        full[i * m + j] = key[k];
        full[j * m + i] = key[k];
    }
    pairs(m).map(|(i, j)| full[perm[i] * m + perm[j]]).collect()
}

/// Orbit of a pattern under relabeling, sorted; its first entry is the
/// canonical representative.
fn orbit(key: &[u64], m: usize, perms: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let mut o: Vec<Vec<u64>> = perms.iter().map(|p| relabel(key, m, p)).collect();
    o.sort();
    o.dedup();
    o
}

/// Lexicographically minimal relabeling of an upper-triangle pattern.
pub fn orbit_canonical(key: &[u64], m: usize) -> Vec<u64> {
    orbit(key, m, &permutations(m)).swap_remove(0)
}

/// Chi-square test that the labeled patterns are uniform within each orbit.
fn orbit_uniformity(patterns: &[Vec<u64>], m: usize) -> (f64, f64, usize) {
    let perms = permutations(m);
    let mut counts: BTreeMap<&Vec<u64>, usize> = BTreeMap::new();
    for p in patterns {
        *counts.entry(p).or_default() += 1;
    }
    let mut seen: BTreeMap<Vec<u64>, ()> = BTreeMap::new();
    let (mut stat, mut df) = (0.0, 0usize);
    for key in counts.keys() {
        let o = orbit(key, m, &perms);
        if seen.insert(o[0].clone(), ()).is_some() || o.len() < 2 {
            continue;
        }
        let obs: Vec<f64> = o.iter().map(|k| counts.get(k).copied().unwrap_or(0) as f64).collect();
        let expected = obs.iter().sum::<f64>() / o.len() as f64;
        stat += obs.iter().map(|c| (c - expected).powi(2) / expected).sum::<f64>();
        df += o.len() - 1;
    }
    let p = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(stat)
    };
    (stat, p, df)
}

/// `Σ_c N_c ‖v̄_c − v̄‖²` over pattern classes `c`.
fn association(classes: &[usize], weights: &[Vec<f64>], n_classes: usize) -> f64 {
    let m = weights[0].len();
    let mut sums = vec![vec![0.0; m]; n_classes];
    let mut counts = vec![0usize; n_classes];
    let mut total = vec![0.0; m];
    for (&c, v) in classes.iter().zip(weights) {
        counts[c] += 1;
        for k in 0..m {
            sums[c][k] += v[k];
            total[k] += v[k];
        }
    }
    let n = classes.len() as f64;
    (0..n_classes)
        .filter(|&c| counts[c] > 0)
        .map(|c| {
            let nc = counts[c] as f64;
            nc * (0..m).map(|k| (sums[c][k] / nc - total[k] / n).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Permutation test of independence between top weights and the pattern.
fn independence(patterns: &[Vec<u64>], weights: &[Vec<f64>], resamples: usize, seed: u64) -> (f64, f64) {
    let mut ids: BTreeMap<&Vec<u64>, usize> = BTreeMap::new();
    for p in patterns {
        let next = ids.len();
        ids.entry(p).or_insert(next);
    }
    let mut classes: Vec<usize> = patterns.iter().map(|p| ids[p]).collect();
    let observed = association(&classes, weights, ids.len());
    if ids.len() < 2 {
        return (observed, 1.0);
    }
    let mut rng = derive_stream(seed, AUX_LANE, 0);
    let mut hits = 0usize;
    for _ in 0..resamples {
        classes.shuffle(&mut rng);
        if association(&classes, weights, ids.len()) >= observed {
            hits += 1;
        }
    }
    (observed, (1 + hits) as f64 / (resamples + 1) as f64)
}

/// Exchangeability of the overlap pattern of the top-`m` atoms and its
/// independence from their weights. Passes when both p-values exceed `alpha`.
pub fn check_exchangeability(target: &Target, opts: &ExchangeOptions, config: &EstimatorConfig) -> Result<IdentityReport> {
    opts.validate()?;
    let start = Instant::now();
    let m = opts.m;
    let recs = run_samples(config, |_, s| -> Result<Option<(Vec<u64>, Vec<f64>)>> {
        let g = target.realize(s)?;
        Ok(top_atoms(&g, m).map(|top| {
            let key = pairs(m).map(|(i, j)| g.cross_overlap(top[i], top[j]).to_bits()).collect();
            let w = top.iter().map(|&a| g.weights()[a]).collect();
            (key, w)
        }))
    })?;
    let mut patterns = Vec::new();
    let mut weights = Vec::new();
    let mut skipped = 0usize;
    for r in recs {
        match r? {
            Some((k, w)) => {
                patterns.push(k);
                weights.push(w);
            }
            None => skipped += 1,
        }
    }
    if patterns.is_empty() {
        return invalid(format!("no sample had {m} explicit atoms"));
    }
    let (chi2, p_exch, df) = orbit_uniformity(&patterns, m);
    let (assoc, p_indep) = independence(&patterns, &weights, opts.resamples, config.seed);
    let p_min = p_exch.min(p_indep);
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for p in &patterns {
        let label: Vec<String> = p.iter().map(|&b| format!("{}", f64::from_bits(b))).collect();
        *freq.entry(label.join(",")).or_default() += 1;
    }
    Ok(IdentityReport {
        name: "exchange".into(),
        lhs: p_min,
        rhs: opts.alpha,
        se_lhs: 0.0,
        se_rhs: 0.0,
        se_diff: 0.0,
        z: f64::NAN,
        n_outer: config.n_outer,
        seed: config.seed,
        pass: p_min > opts.alpha,
        wall_time_s: if config.timing { start.elapsed().as_secs_f64() } else { 0.0 },
        details: Some(json!({
            "m": m,
            "used": patterns.len(),
            "skipped": skipped,
            "chi_square": chi2,
            "df": df,
            "p_exchangeability": p_exch,
            "association": assoc,
            "p_independence": p_indep,
            "resamples": opts.resamples,
            "patterns": freq,
        })),
    })
}
