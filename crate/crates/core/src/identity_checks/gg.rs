use super::{run_records, IdentityReport, Target};
use crate::error::{invalid, Result};
use crate::finite_oracle::{for_each_tuple, FiniteMeasure, DEFAULT_BUDGET};
use crate::functionals::{OverlapFn, PairProduct};
use crate::mc_engine::{EstimatorConfig, PairedEstimate};
use crate::measure::{GibbsMeasure, Point};
use crate::numeric::KahanSum;
use serde_json::json;
use std::time::Instant;

/// Per-tuple ingredients of the Ghirlanda-Guerra identity, with the new
/// replica `σ^{n+1}` integrated out exactly:
/// `a = f ⟨ψ(R_{1,n+1})⟩`, `b = f`, `c = ⟨ψ(R_{1,2})⟩`, `d = Σ_{l=2}^n f ψ(R_{1,l})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgValues {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn gg_values<M: GibbsMeasure<f64>>(
    measure: &M,
    n: usize,
    f: &PairProduct<f64>,
    psi: &OverlapFn<f64>,
    tuple: &[Point],
) -> GgValues {
    let fv = f.eval_points(measure, tuple);
    let s1 = tuple[0];
    let mut g = KahanSum::new();
    for (a, &w) in measure.weights().iter().enumerate() {
        g.add(w * psi.eval(measure.overlap(s1, Point::fresh(a))));
    }
    let g = g.total();
    let d = (2..=n)
        .map(|l| fv * psi.eval(measure.overlap(s1, tuple[l - 1])))
        .sum();
    GgValues { a: fv * g, b: fv, c: g, d }
}

fn validate(n: usize, f: &PairProduct<f64>) -> Result<()> {
    if n < 2 {
        return invalid("the identity needs n >= 2");
    }
    if f.max_index() > n {
        return invalid(format!("f references replica {} but n = {n}", f.max_index()));
    }
    Ok(())
}

/// `E⟨f ψ(R_{1,n+1})⟩ = (1/n) E⟨f⟩ E⟨ψ(R_{1,2})⟩ + (1/n) Σ_{l=2}^n E⟨f ψ(R_{1,l})⟩`.
///
/// The product of means is linearized per sample so that its batch-means
/// error is that of the delta method.
pub fn check_gg(
    target: &Target,
    n: usize,
    f: &PairProduct<f64>,
    psi: &OverlapFn<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    validate(n, f)?;
    let start = Instant::now();
    let recs = run_records(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(n, s);
        Ok(gg_values(&m, n, f, psi, &tuple))
    })?;
    let len = recs.len() as f64;
    let b_bar = recs.iter().map(|r| r.b).sum::<f64>() / len;
    let c_bar = recs.iter().map(|r| r.c).sum::<f64>() / len;
    let nf = n as f64;
    let lhs: Vec<f64> = recs.iter().map(|r| r.a).collect();
    let rhs: Vec<f64> = recs
        .iter()
        .map(|r| (r.b * c_bar + b_bar * r.c - b_bar * c_bar) / nf + r.d / nf)
        .collect();
    let est = PairedEstimate::from_values(&lhs, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("gg", &est, config)
        .with_details(json!({ "n": n }))
        .timed(start, config))
}

/// Both sides of the identity by full enumeration over a finite measure.
pub fn check_gg_exact(
    measure: &FiniteMeasure<f64>,
    n: usize,
    f: &PairProduct<f64>,
    psi: &OverlapFn<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    validate(n, f)?;
    let start = Instant::now();
    let mut sums = [KahanSum::new(); 4];
    let mut count = 0;
    for_each_tuple(measure, n, DEFAULT_BUDGET, |pts, w| {
        let v = gg_values(measure, n, f, psi, pts);
        for (acc, x) in sums.iter_mut().zip([v.a, v.b, v.c, v.d]) {
            acc.add(w * x);
        }
        count += 1;
    })?;
    let [a, b, c, d] = sums.map(|k| k.total());
    let nf = n as f64;
    Ok(IdentityReport::exact("gg-exact", a, b * c / nf + d / nf, count, config)
        .with_details(json!({ "n": n }))
        .timed(start, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeSpec;
    use crate::functionals::{IntervalSet, StepFunction};

    fn cfg(n: usize) -> EstimatorConfig {
        EstimatorConfig::default().with_n_outer(n).with_seed(11)
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = Target::Cascade(CascadeSpec::single_level(0.5, 0.0, 1.0, 16).unwrap());
        let psi = OverlapFn::constant(1.0);
        assert!(check_gg(&t, 1, &PairProduct::one(), &psi, &cfg(64)).is_err());
        let f = PairProduct::single(1, 3, OverlapFn::constant(1.0)).unwrap();
        assert!(check_gg(&t, 2, &f, &psi, &cfg(64)).is_err());
    }

    #[test]
    fn one_level_psi_on_diagonal() {
        let t = Target::Cascade(CascadeSpec::single_level(0.5, 0.0, 1.0, 512).unwrap());
        let psi = OverlapFn::indicator(IntervalSet::single(1.0), 1.0);
        let r = check_gg(&t, 2, &PairProduct::one(), &psi, &cfg(6400)).unwrap();
        assert!(r.z.abs() <= 4.0, "{r:?}");
        assert!((r.lhs - 0.5).abs() < 5.0 * r.se_lhs + 0.01);
    }

    #[test]
    fn orthonormal_non_gg_measure_fails_exactly() {
        let m = FiniteMeasure::from_unnormalized(vec![0.9, 0.2, 0.5, 0.1, 0.7, 0.3, 0.6, 0.4], {
            let mut g = vec![0.0; 64];
            for i in 0..8 {
                g[i * 8 + i] = 1.0;
            }
            g
        })
        .unwrap();
        let psi = OverlapFn::Step(StepFunction::at_least(1.0, 1.0));
        let f = PairProduct::single(1, 2, psi.clone()).unwrap();
        let r = check_gg_exact(&m, 2, &f, &psi, &cfg(64)).unwrap();
        let w = m.weights();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        let s3: f64 = w.iter().map(|x| x * x * x).sum();
        assert!((r.lhs - s3).abs() < 1e-14);
        assert!((r.rhs - (0.5 * s2 * s2 + 0.5 * s2)).abs() < 1e-14);
        assert!(r.z.is_infinite() && !r.pass);
    }
}
