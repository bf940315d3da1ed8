use super::{run_pairs, run_records, IdentityReport, Target};
use crate::cascade::CascadeSpec;
use crate::error::{invalid, Result};
use crate::finite_oracle::{for_each_tuple, FiniteMeasure, DEFAULT_BUDGET};
use crate::functionals::{log_z_product, FunctionFamily, Groups, OverlapFn, PairProduct, StepFunction};
use crate::mc_engine::{EstimatorConfig, PairedEstimate};
use crate::measure::{GibbsMeasure, Point};
use crate::numeric::KahanSum;
use serde_json::json;
use std::time::Instant;

/// `(Φ, Φ exp Σ_l F_l(σ^l, …) / ⟨exp F⟩^n)` for one tuple.
pub fn main_values<M: GibbsMeasure<f64>>(
    measure: &M,
    family: &FunctionFamily<f64>,
    phi: &PairProduct<f64>,
    tuple: &[Point],
) -> (f64, f64) {
    let p = phi.eval_points(measure, tuple);
    if p == 0.0 {
        return (0.0, 0.0);
    }
    (p, p * family.log_density(measure, tuple).exp())
}

fn validate_main(family: &FunctionFamily<f64>, phi: &PairProduct<f64>) -> Result<usize> {
    let n = family.n();
    if n == 0 {
        return invalid("the family needs at least one function");
    }
    if phi.max_index() > n {
        return invalid(format!("Φ references replica {} but n = {n}", phi.max_index()));
    }
    Ok(n)
}

/// `E⟨Φ⟩ = E⟨Φ exp Σ_l F_l / ⟨exp F⟩^n⟩`.
pub fn check_main(
    target: &Target,
    family: &FunctionFamily<f64>,
    phi: &PairProduct<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    let n = validate_main(family, phi)?;
    let start = Instant::now();
    let est = run_pairs(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(n, s);
        Ok(main_values(&m, family, phi, &tuple))
    })?;
    Ok(IdentityReport::from_estimate("main", &est, config)
        .with_details(json!({ "n": n }))
        .timed(start, config))
}

/// Both sides by enumeration over a finite measure.
pub fn check_main_exact(
    measure: &FiniteMeasure<f64>,
    family: &FunctionFamily<f64>,
    phi: &PairProduct<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    let n = validate_main(family, phi)?;
    let (mut lhs, mut rhs) = (KahanSum::new(), KahanSum::new());
    let mut count = 0;
    for_each_tuple(measure, n, DEFAULT_BUDGET, |pts, w| {
        let (a, b) = main_values(measure, family, phi, pts);
        lhs.add(w * a);
        rhs.add(w * b);
        count += 1;
    })?;
    Ok(IdentityReport::exact("main-exact", lhs.total(), rhs.total(), count, config))
}

/// Finite-difference form of the identity at `n = 2`, `f_1 = ±t ψ`, `f_2 = 0`.
///
/// The symmetric difference quotient of the right side in `t` is compared
/// with the first-order term `Φ (∫ψ dμ + ψ(R_{1,2}) − 2⟨ψ(σ·σ^1)⟩)`; both
/// have mean zero.
pub fn check_main_fd(
    target: &Target,
    psi: &OverlapFn<f64>,
    phi: &PairProduct<f64>,
    t: f64,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    if !(t > 0.0) {
        return invalid("the finite-difference step must be positive");
    }
    if phi.max_index() > 2 {
        return invalid("Φ may only use replicas 1 and 2");
    }
    let start = Instant::now();
    let mu = target.mu();
    let plus = FunctionFamily::new(vec![psi.scaled(t), OverlapFn::zero()], &mu);
    let minus = plus.scaled(-1.0);
    let psi_mu = psi.integrate(&mu);
    let recs = run_records(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(2, s);
        let p = phi.eval_points(&m, &tuple);
        if p == 0.0 {
            return Ok((0.0, 0.0));
        }
        let fd = p * (plus.log_density(&m, &tuple).exp() - minus.log_density(&m, &tuple).exp()) / (2.0 * t);
        let mut g = KahanSum::new();
        for (a, &w) in m.weights().iter().enumerate() {
            g.add(w * psi.eval(m.overlap(tuple[0], Point::fresh(a))));
        }
        let lin = p * (psi_mu + psi.eval(m.overlap(tuple[0], tuple[1])) - 2.0 * g.total());
        Ok((fd, lin))
    })?;
    let max_gap = recs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    let est = PairedEstimate::from_values(&lhs, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("main-fd", &est, config)
        .with_details(json!({ "t": t, "max_abs_gap": max_gap }))
        .timed(start, config))
}

/// `(Φ, Φ Z^1 ⋯ Z^r)` for one tuple.
pub fn iterated_values<M: GibbsMeasure<f64>>(
    measure: &M,
    family: &FunctionFamily<f64>,
    groups: &Groups,
    phi: &PairProduct<f64>,
    tuple: &[Point],
) -> (f64, f64) {
    let p = phi.eval_points(measure, tuple);
    if p == 0.0 {
        return (0.0, 0.0);
    }
    (p, p * log_z_product(family, groups, measure, tuple).exp())
}

/// `E⟨Φ⟩ = E⟨Z^1 ⋯ Z^r Φ⟩` with `Φ` a function of the last group only.
pub fn check_iterated(
    target: &Target,
    family: &FunctionFamily<f64>,
    groups: &Groups,
    phi: &PairProduct<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    let n = groups.total();
    if family.n() != n {
        return invalid(format!("{} functions for {n} replicas", family.n()));
    }
    let (first, last) = groups.bounds(groups.count() - 1);
    if !phi.within(first, last) {
        return invalid(format!("Φ must only use replicas {first}..={last} of the last group"));
    }
    let start = Instant::now();
    let est = run_pairs(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(n, s);
        Ok(iterated_values(&m, family, groups, phi, &tuple))
    })?;
    Ok(IdentityReport::from_estimate("iterated", &est, config)
        .with_details(json!({ "group_ends": groups.ends() }))
        .timed(start, config))
}

/// Closed form of `Z^1 Z^2` for PD weights with `I_1 = {1}`, `I_2 = {2}` and
/// `f_1 = f_2 = t I(x < 1)`; `v1`, `v2` are the weights of the replicas' atoms.
pub fn iterated_pd_closed_form(v1: f64, v2: f64, same: bool, zeta: f64, t: f64) -> f64 {
    let et = t.exp();
    let num = (2.0 * zeta * t).exp();
    let first = v1 + et * (1.0 - v1);
    if same {
        num / (first * (v1 + (2.0 * t).exp() * (1.0 - v1)))
    } else {
        num / (first * (v1 + v2 + et * (1.0 - v1 - v2)))
    }
}

/// The two-group PD example: `1 = E Σ_{l≠l'} … + E Σ_l …`. The left side is
/// the constant 1; the right side is estimated through the general `Z^p`
/// path and compared per sample with its closed form.
pub fn check_iterated_pd_example(zeta: f64, t: f64, k: usize, config: &EstimatorConfig) -> Result<IdentityReport> {
    let spec = CascadeSpec::single_level(zeta, 0.0, 1.0, k)?;
    let mu = spec.exact_mu();
    let f = OverlapFn::Step(StepFunction::below(1.0, t));
    let family = FunctionFamily::new(vec![f.clone(), f], &mu);
    let groups = Groups::new(vec![1, 2])?;
    let start = Instant::now();
    let recs = run_records(config, |s| {
        let m = spec.build(s)?;
        let tuple = m.sample_replicas(2, s);
        let general = log_z_product(&family, &groups, &m, &tuple).exp();
        let weight = |p: Point| if m.is_diffuse(p.atom as usize) { 0.0 } else { m.weights()[p.atom as usize] };
        let closed = iterated_pd_closed_form(
            weight(tuple[0]),
            weight(tuple[1]),
            m.same_point(tuple[0], tuple[1]),
            zeta,
            t,
        );
        Ok((general, closed))
    })?;
    let max_rel = recs
        .iter()
        .map(|(g, c)| (g - c).abs() / c.abs().max(1.0))
        .fold(0.0, f64::max);
    let rhs: Vec<f64> = recs.iter().map(|r| r.0).collect();
    let est = PairedEstimate::against_constant(1.0, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("iterated-pd", &est, config)
        .with_details(json!({ "zeta": zeta, "t": t, "max_rel_closed_form_gap": max_rel }))
        .require(max_rel <= 1e-10)
        .timed(start, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::IntervalSet;

    fn cfg(n: usize) -> EstimatorConfig {
        EstimatorConfig::default().with_n_outer(n).with_seed(3)
    }

    fn one_level() -> Target {
        Target::Cascade(CascadeSpec::single_level(0.5, 0.0, 1.0, 256).unwrap())
    }

    #[test]
    fn zero_family_is_sample_identical() {
        let t = one_level();
        let phi = PairProduct::single(1, 2, OverlapFn::Step(StepFunction::at_least(1.0, 1.0))).unwrap();
        let r = check_main(&t, &FunctionFamily::zeros(2), &phi, &cfg(320)).unwrap();
        assert_eq!(r.lhs, r.rhs);
        assert_eq!(r.se_diff, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn one_level_diagonal_family() {
        let t = one_level();
        let ind = OverlapFn::indicator(IntervalSet::single(1.0), 1.0);
        let fam = FunctionFamily::new(vec![ind.clone(), ind.clone()], &t.mu());
        let phi = PairProduct::single(1, 2, ind).unwrap();
        let r = check_main(&t, &fam, &phi, &cfg(6400)).unwrap();
        assert!(r.z.abs() <= 4.0, "{r:?}");
    }

    #[test]
    fn iterated_single_group_equals_main() {
        let t = one_level();
        let fam = FunctionFamily::new(
            vec![
                OverlapFn::Step(StepFunction::at_least(1.0, 0.7)),
                OverlapFn::Step(StepFunction::below(1.0, -0.4)),
            ],
            &t.mu(),
        );
        let phi = PairProduct::single(1, 2, OverlapFn::Step(StepFunction::at_least(1.0, 1.0))).unwrap();
        let a = check_main(&t, &fam, &phi, &cfg(640)).unwrap();
        let b = check_iterated(&t, &fam, &Groups::single(2).unwrap(), &phi, &cfg(640)).unwrap();
        assert!((a.rhs - b.rhs).abs() < 1e-12);
        assert_eq!(a.lhs, b.lhs);
    }

    #[test]
    fn iterated_rejects_cross_group_phi() {
        let t = one_level();
        let fam = FunctionFamily::zeros(2);
        let phi = PairProduct::single(1, 2, OverlapFn::constant(1.0)).unwrap();
        let g = Groups::new(vec![1, 2]).unwrap();
        assert!(check_iterated(&t, &fam, &g, &phi, &cfg(64)).is_err());
    }

    #[test]
    fn pd_example_closed_form_agrees() {
        let r = check_iterated_pd_example(0.5, 0.7, 256, &cfg(1280)).unwrap();
        let gap = r.details.as_ref().unwrap()["max_rel_closed_form_gap"].as_f64().unwrap();
        assert!(gap <= 1e-10, "{gap}");
        assert_eq!(r.lhs, 1.0);
    }

    #[test]
    fn closed_form_at_zero_t() {
        assert!((iterated_pd_closed_form(0.3, 0.2, false, 0.5, 0.0) - 1.0).abs() < 1e-15);
        assert!((iterated_pd_closed_form(0.3, 0.3, true, 0.5, 0.0) - 1.0).abs() < 1e-15);
    }
}
