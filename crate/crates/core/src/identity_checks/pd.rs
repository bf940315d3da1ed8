use super::{run_records, IdentityReport};
use crate::cascade::{CascadeMeasure, CascadeSpec};
use crate::error::{invalid, Error, Result};
use crate::mc_engine::{batch_means, EstimatorConfig, PairedEstimate};
use crate::measure::{GibbsMeasure, Point};
use crate::numeric::KahanSum;
use crate::pd_core::{sample_pd, TailPolicy, ZetaParam, DEFAULT_TRUNCATION};
use serde_json::json;
use std::time::Instant;

/// `e^{Σ_p (n_p − ζ) s_p} / (Σ_p v_p e^{s_p} + 1 − Σ_p v_p)^n`.
fn pd_factor(v: &[f64], sizes: &[usize], s: &[f64], zeta: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let expo: f64 = sizes.iter().zip(s).map(|(&np, &sp)| (np as f64 - zeta) * sp).sum();
    let denom: f64 = v.iter().zip(s).map(|(&vp, &sp)| vp * sp.exp() - vp).sum::<f64>() + 1.0;
    expo.exp() / denom.powi(n as i32)
}

fn group_sums(sizes: &[usize], t: &[f64]) -> Vec<f64> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&np| {
            let s = t[start..start + np].iter().sum();
            start += np;
            s
        })
        .collect()
}

/// Per-sample values of both sides of the PD identity for one tuple drawn
/// from `measure` (a one-level cascade with `q_0 = 0`, `q_1 = 1`): the
/// indicator that replicas coincide exactly within groups, and that
/// indicator times the density factor. Replicas on the diffuse part carry
/// weight 0.
pub fn pd_identity_values(
    measure: &CascadeMeasure<f64>,
    sizes: &[usize],
    t: &[f64],
    zeta: f64,
    tuple: &[Point],
) -> (f64, f64) {
    let mut group = Vec::with_capacity(tuple.len());
    for (p, &np) in sizes.iter().enumerate() {
        group.extend(std::iter::repeat_n(p, np));
    }
    for j in 0..tuple.len() {
        for k in j + 1..tuple.len() {
            if measure.same_point(tuple[j], tuple[k]) != (group[j] == group[k]) {
                return (0.0, 0.0);
            }
        }
    }
    let mut first = 0;
    let v: Vec<f64> = sizes
        .iter()
        .map(|&np| {
            let a = tuple[first].atom as usize;
            first += np;
            if measure.is_diffuse(a) {
                0.0
            } else {
                measure.weights()[a]
            }
        })
        .collect();
    (1.0, pd_factor(&v, sizes, &group_sums(sizes, t), zeta))
}

/// Both sides for `r = 1`, summed exactly over the explicit atoms.
fn single_group_sums(weights: &[f64], n1: usize, s: f64, zeta: f64) -> (f64, f64) {
    let (mut lhs, mut rhs) = (KahanSum::new(), KahanSum::new());
    for &v in weights {
        let x = v.powi(n1 as i32);
        lhs.add(x);
        rhs.add(x * pd_factor(&[v], &[n1], &[s], zeta));
    }
    (lhs.total(), rhs.total())
}

/// `E Σ_{l_1≠…≠l_r} v_{l_1}^{n_1} ⋯ v_{l_r}^{n_r}` against its reweighted form
/// with `s_p = Σ_{j ∈ I_p} t_j`.
///
/// For `r = 1` the sum over atoms is exact; for `r ≥ 2` it is the replica
/// probability of the corresponding coincidence pattern.
pub fn check_pd_identity(zeta: f64, sizes: &[usize], t: &[f64], config: &EstimatorConfig) -> Result<IdentityReport> {
    ZetaParam::new(zeta)?;
    let r = sizes.len();
    if r == 0 || sizes.contains(&0) {
        return invalid("group sizes must be positive");
    }
    if r > 3 {
        return Err(Error::Unsupported(format!("PD identities with r = {r} > 3 distinct atoms")));
    }
    let n: usize = sizes.iter().sum();
    if t.len() != n {
        return invalid(format!("expected {n} t values, got {}", t.len()));
    }
    let k = config.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let spec = CascadeSpec::single_level(zeta, 0.0, 1.0, k)?.with_leaf_budget(k.max(DEFAULT_TRUNCATION))?;
    let s = group_sums(sizes, t);
    let start = Instant::now();
    let recs = run_records(config, |stream| {
        let m = spec.build(stream)?;
        if r == 1 {
            Ok(single_group_sums(m.leaf_weights(), sizes[0], s[0], zeta))
        } else {
            let tuple = m.sample_replicas(n, stream);
            Ok(pd_identity_values(&m, sizes, t, zeta, &tuple))
        }
    })?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    let est = PairedEstimate::from_values(&lhs, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("pd-identity", &est, config)
        .with_details(json!({
            "zeta": zeta,
            "sizes": sizes,
            "t": t,
            "method": if r == 1 { "atom-sum" } else { "replica-pattern" },
        }))
        .timed(start, config))
}

/// `E Σ_l v_l² = 1 − ζ` for PD(ζ) weights.
pub fn check_zeta(zeta: f64, config: &EstimatorConfig) -> Result<IdentityReport> {
    let z = ZetaParam::new(zeta)?;
    let k = config.truncation.unwrap_or(DEFAULT_TRUNCATION);
    if k < 2 {
        return invalid("truncation must be at least 2");
    }
    let start = Instant::now();
    let recs = run_records(config, |s| {
        let w = sample_pd(z, k, s)?;
        Ok((w.sum_of_squares(TailPolicy::Diffuse), w.diffuse_mass()))
    })?;
    let (vals, tails): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    let e = batch_means(&vals, config.n_batches);
    let tail = tails.iter().sum::<f64>() / tails.len() as f64;
    let est = PairedEstimate {
        mean_lhs: e.mean,
        mean_rhs: 1.0 - zeta,
        se_lhs: e.se,
        se_rhs: 0.0,
        se_diff: e.se,
        n: vals.len(),
    };
    Ok(IdentityReport::from_estimate("zeta", &est, config)
        .with_details(json!({ "zeta": zeta, "truncation": k, "mean_diffuse_mass": tail }))
        .timed(start, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> EstimatorConfig {
        let mut c = EstimatorConfig::default().with_n_outer(n).with_seed(5);
        c.truncation = Some(512);
        c
    }

    #[test]
    fn zero_t_sides_agree_per_sample() {
        let r = check_pd_identity(0.4, &[1, 1], &[0.0, 0.0], &cfg(640)).unwrap();
        assert_eq!(r.lhs, r.rhs);
        assert_eq!(r.se_diff, 0.0);
        let r1 = check_pd_identity(0.4, &[2], &[0.0, 0.0], &cfg(640)).unwrap();
        assert!((r1.lhs - r1.rhs).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(
            check_pd_identity(0.4, &[1, 1, 1, 1], &[0.0; 4], &cfg(64)),
            Err(Error::Unsupported(_))
        ));
        assert!(check_pd_identity(0.4, &[1, 1], &[0.0], &cfg(64)).is_err());
        assert!(check_pd_identity(1.2, &[1], &[0.0], &cfg(64)).is_err());
    }

    #[test]
    fn factor_examples() {
        // n = 2, r = 2, t = (t, -t)
        let (v1, v2, t) = (0.3, 0.2, 0.5f64);
        let f = pd_factor(&[v1, v2], &[1, 1], &[t, -t], 0.6);
        let expect = 1.0 / (v1 * t.exp() + v2 * (-t).exp() + 1.0 - v1 - v2).powi(2);
        assert!((f - expect).abs() < 1e-14);
    }

    #[test]
    fn zeta_check_small_run() {
        let r = check_zeta(0.5, &cfg(3200)).unwrap();
        assert!(r.z.abs() < 4.0, "{r:?}");
    }
}
