use super::count_report;
use crate::error::{invalid, Result};
use crate::finite_oracle::{for_each_tuple, FiniteMeasure, DEFAULT_BUDGET};
use crate::identity_checks::{IdentityReport, Target};
use crate::mc_engine::{run_samples, EstimatorConfig};
use crate::measure::{GibbsMeasure, Point};
use crate::numeric::KahanSum;
use serde_json::json;
use std::time::Instant;

/// Whether overlaps `(R_12, R_13, R_23)` violate ultrametricity at level `q`
/// under some labeling (`R_ij ≥ q`, `R_ik ≥ q`, `R_jk < q`), or at any level
/// when `q` is `None` (the two smallest overlaps differ).
pub fn is_violation(r12: f64, r13: f64, r23: f64, q: Option<f64>) -> bool {
    match q {
        Some(q) => {
            let ge = [r12 >= q, r13 >= q, r23 >= q];
            ge.iter().filter(|&&b| b).count() == 2
        }
        None => {
            let mut v = [r12, r13, r23];
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite overlaps"));
            v[0] != v[1]
        }
    }
}

fn triple(m: &impl GibbsMeasure<f64>, p: &[Point]) -> (f64, f64, f64) {
    (m.overlap(p[0], p[1]), m.overlap(p[0], p[2]), m.overlap(p[1], p[2]))
}

/// Counts ultrametricity violations over `config.n_outer` sampled triples,
/// each from a fresh realization.
pub fn check_ultrametric(target: &Target, q: Option<f64>, config: &EstimatorConfig) -> Result<IdentityReport> {
    let start = Instant::now();
    let flags = run_samples(config, |_, s| -> Result<bool> {
        let m = target.realize(s)?;
        let p = m.sample_replicas(3, s);
        let (a, b, c) = triple(&m, &p);
        Ok(is_violation(a, b, c, q))
    })?
    .into_iter()
    .collect::<Result<Vec<bool>>>()?;
    let violations = flags.iter().filter(|&&v| v).count();
    let mut r = count_report(
        "ultra",
        violations,
        flags.len(),
        config,
        json!({ "q": q, "violations": violations, "triples": flags.len() }),
    );
    if config.timing {
        r.wall_time_s = start.elapsed().as_secs_f64();
    }
    Ok(r)
}

/// `G^{⊗3}` mass of violating triples, by enumeration.
pub fn exact_ultrametric_violation(measure: &FiniteMeasure<f64>, q: Option<f64>) -> Result<f64> {
    let mut acc = KahanSum::new();
    for_each_tuple(measure, 3, DEFAULT_BUDGET, |p, w| {
        let (a, b, c) = triple(measure, p);
        if is_violation(a, b, c, q) {
            acc.add(w);
        }
    })?;
    Ok(acc.total())
}

/// Estimates `μ([-1, -ε])` with the second replica integrated out exactly,
/// and checks `Σ_{l,l'≤n} R_{l,l'} ≥ 0` on `n`-replica tuples.
pub fn check_positivity(target: &Target, eps: f64, n: usize, config: &EstimatorConfig) -> Result<IdentityReport> {
    if !(eps > 0.0) {
        return invalid("epsilon must be positive");
    }
    if n == 0 {
        return invalid("the Gram-sum diagnostic needs at least one replica");
    }
    let start = Instant::now();
    let recs = run_samples(config, |_, s| -> Result<(f64, f64)> {
        let m = target.realize(s)?;
        let p = m.sample_replicas(n.max(1), s);
        let mut mass = KahanSum::new();
        for (a, &w) in m.weights().iter().enumerate() {
            if m.overlap(p[0], Point::fresh(a)) <= -eps {
                mass.add(w);
            }
        }
        Ok((mass.total(), m.gram(&p).total()))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let neg_mass = recs.iter().map(|r| r.0).sum::<f64>() / recs.len() as f64;
    let min_sum = recs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let negative_sums = recs.iter().filter(|r| r.1 < -1e-12).count();
    let positive_mass = recs.iter().filter(|r| r.0 > 0.0).count();
    let mut r = count_report(
        "positivity",
        positive_mass + negative_sums,
        recs.len(),
        config,
        json!({
            "eps": eps,
            "samples_with_mass_below_minus_eps": positive_mass,
            "negative_gram_sums": negative_sums,
            "min_gram_sum": min_sum,
            "gram_n": n,
        }),
    );
    r.lhs = neg_mass;
    if config.timing {
        r.wall_time_s = start.elapsed().as_secs_f64();
    }
    Ok(r)
}
