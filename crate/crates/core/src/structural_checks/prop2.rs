use super::count_report;
use crate::error::{invalid, Error, Result};
use crate::functionals::FunctionFamily;
use crate::identity_checks::{IdentityReport, Target};
use crate::mc_engine::{run_samples, EstimatorConfig, Stream};
use crate::measure::{GibbsMeasure, Point};
use crate::numeric::KahanSum;
use crate::pd_core::TailPolicy;
use serde_json::json;
use std::time::Instant;

/// `F̄` values within this of zero are treated as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// `(G{F̄ > τ}, G{F̄ < −τ})` for one tuple; a side is exactly zero when no
/// atom lands in it.
pub fn prop2_masses<M: GibbsMeasure<f64>>(
    measure: &M,
    family: &FunctionFamily<f64>,
    tuple: &[Point],
) -> (f64, f64) {
    let shift = family.sum_f_l(measure, tuple) / family.n() as f64;
    let (mut pos, mut neg) = (KahanSum::new(), KahanSum::new());
    for (a, &w) in measure.weights().iter().enumerate() {
        let fbar = family.eval_f(measure, Point::fresh(a), tuple) - shift;
        if fbar > ZERO_TOL {
            pos.add(w);
        } else if fbar < -ZERO_TOL {
            neg.add(w);
        }
    }
    (pos.total(), neg.total())
}

/// Draws a point from the explicit atoms only.
fn sample_explicit<M: GibbsMeasure<f64>>(m: &M, tag: u32, s: &mut Stream) -> Result<Point> {
    for _ in 0..MAX_REDRAWS {
        let p = m.sample_point(tag, s);
        if !m.is_diffuse(p.atom as usize) {
            return Ok(p);
        }
    }
    Err(Error::ResourceLimit(format!("no explicit atom drawn in {MAX_REDRAWS} tries")))
}

const MAX_REDRAWS: usize = 10_000;

/// Counts tuples where exactly one of `G{F̄ > 0}` and `G{F̄ < 0}` vanishes.
///
/// Cascade targets keep their diffuse tail, so every cluster carries its
/// mass, while the tuple is drawn from explicit leaves, whose own atoms
/// have positive mass.
pub fn check_prop2(target: &Target, family: &FunctionFamily<f64>, config: &EstimatorConfig) -> Result<IdentityReport> {
    let n = family.n();
    if n == 0 {
        return invalid("the family needs at least one function");
    }
    let start = Instant::now();
    let resolved = match target {
        Target::Cascade(s) => Target::Cascade(s.clone().with_tail(TailPolicy::Diffuse)),
        Target::HeavyPairShareBranch { spec, threshold } => Target::HeavyPairShareBranch {
            spec: spec.clone().with_tail(TailPolicy::Diffuse),
            threshold: *threshold,
        },
        other => other.clone(),
    };
    let recs = run_samples(config, |_, s| -> Result<(f64, f64)> {
        let m = resolved.realize(s)?;
        let tuple = (0..n as u32).map(|l| sample_explicit(&m, l, s)).collect::<Result<Vec<_>>>()?;
        Ok(prop2_masses(&m, family, &tuple))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let zero = |x: f64| x <= 0.0;
    let violations = recs.iter().filter(|(p, q)| zero(*p) != zero(*q)).count();
    let both = recs.iter().filter(|(p, q)| !zero(*p) && !zero(*q)).count();
    let mut r = count_report(
        "prop2",
        violations,
        recs.len(),
        config,
        json!({ "n": n, "violations": violations, "both_positive": both, "both_zero": recs.len() - violations - both }),
    );
    if config.timing {
        r.wall_time_s = start.elapsed().as_secs_f64();
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeSpec;
    use crate::finite_oracle::FiniteMeasure;
    use crate::functionals::{IntervalSet, OverlapFn};

    fn c_family(mu: &crate::measure::DiscreteLaw<f64>, lo: f64) -> FunctionFamily<f64> {
        let c = IntervalSet::at_least(lo);
        FunctionFamily::new(vec![OverlapFn::indicator(c.clone(), 1.0), OverlapFn::indicator(c, -1.0)], mu)
    }

    #[test]
    fn zero_family_has_no_violations() {
        let t = Target::Cascade(CascadeSpec::single_level(0.5, 0.0, 1.0, 64).unwrap());
        let cfg = EstimatorConfig::default().with_n_outer(320);
        let r = check_prop2(&t, &FunctionFamily::zeros(2), &cfg).unwrap();
        assert!(r.pass);
        assert_eq!(r.details.unwrap()["both_zero"], 320);
    }

    #[test]
    fn cascade_dichotomy_holds() {
        let spec = CascadeSpec::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], vec![16, 64]).unwrap();
        let fam = c_family(&spec.exact_mu(), 0.4);
        let cfg = EstimatorConfig::default().with_n_outer(1280);
        let r = check_prop2(&Target::Cascade(spec), &fam, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn non_ultrametric_measure_violates() {
        let m = FiniteMeasure::from_unnormalized(
            vec![1.0, 1.0, 1.0],
            vec![1.0, 0.8, 0.8, 0.8, 1.0, 0.2, 0.8, 0.2, 1.0],
        )
        .unwrap();
        let fam = c_family(&m.exact_mu(), 0.5);
        // σ^1 = b, σ^2 = a: F̄ is 0 on a and b and -1 on c
        let tuple = [Point { atom: 1, tag: 0 }, Point { atom: 0, tag: 1 }];
        let (p, q) = prop2_masses(&m, &fam, &tuple);
        assert!((p == 0.0) != (q == 0.0), "{p} {q}");
        let cfg = EstimatorConfig::default().with_n_outer(640);
        assert!(!check_prop2(&Target::Finite(m), &fam, &cfg).unwrap().pass);
    }
}
