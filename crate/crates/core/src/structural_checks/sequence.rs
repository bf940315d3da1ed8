use crate::error::{invalid, Result};
use crate::functionals::IntervalSet;
use crate::identity_checks::{IdentityReport, Target};
use crate::mc_engine::{run_samples, EstimatorConfig};
use crate::measure::{GibbsMeasure, Point};
use serde_json::json;
use std::time::Instant;

/// `1 + 1/ε` when `B ⊆ [-1, -ε]` for some `ε > 0`.
pub fn packing_bound(b: &IntervalSet<f64>) -> Option<f64> {
    let sup = b.parts().iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
    if b.parts().is_empty() || sup >= 0.0 {
        None
    } else {
        Some(1.0 + 1.0 / -sup)
    }
}

/// Greedily extends `start` by points whose overlaps with every member lie
/// in `b`, scanning atoms in index order, until `n_target` members or no
/// candidate is left. Point atoms may repeat; diffuse atoms supply new
/// distinct points.
pub fn greedy_sequence<M: GibbsMeasure<f64>>(
    measure: &M,
    b: &IntervalSet<f64>,
    start: Point,
    n_target: usize,
) -> Vec<Point> {
    let mut seq = vec![start];
    let mut next_tag = start.tag.wrapping_add(1);
    while seq.len() < n_target {
        let found = (0..measure.atom_count()).map(|a| Point { atom: a as u32, tag: next_tag }).find(|&c| {
            measure.weights()[c.atom as usize] > 0.0 && seq.iter().all(|&s| b.contains(measure.overlap(c, s)))
        });
        match found {
            Some(c) => {
                seq.push(c);
                next_tag = next_tag.wrapping_add(1);
            }
            None => break,
        }
    }
    seq
}

/// Runs [`greedy_sequence`] from a sampled point for `config.n_outer` trials.
pub fn check_sequence(
    target: &Target,
    b: &IntervalSet<f64>,
    n_target: usize,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    if n_target == 0 {
        return invalid("target length must be positive");
    }
    let start = Instant::now();
    let lens = run_samples(config, |_, s| -> Result<usize> {
        let m = target.realize(s)?;
        let p = m.sample_point(0, s);
        Ok(greedy_sequence(&m, b, p, n_target).len())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let bound = packing_bound(b);
    let max_len = lens.iter().copied().max().unwrap_or(0);
    let reached = lens.iter().filter(|&&l| l == n_target).count();
    let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
    let mu_b = target.mu().mass_where(|x| b.contains(x));
    let pass = match bound {
        Some(bd) => max_len as f64 <= bd,
        None => mu_b == 0.0 || reached == lens.len(),
    };
    Ok(IdentityReport {
        name: "sequence".into(),
        lhs: mean,
        rhs: n_target as f64,
        se_lhs: 0.0,
        se_rhs: 0.0,
        se_diff: 0.0,
        z: f64::NAN,
        n_outer: lens.len(),
        seed: config.seed,
        pass,
        wall_time_s: if config.timing { start.elapsed().as_secs_f64() } else { 0.0 },
        details: Some(json!({
            "set": b.to_string(),
            "mu_of_set": mu_b,
            "max_length": max_len,
            "reached_target": reached,
            "packing_bound": bound,
        })),
    })
}
