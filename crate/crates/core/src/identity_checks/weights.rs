use super::{run_records, IdentityReport, Target};
use crate::error::{invalid, Result};
use crate::functionals::{
    apply_t, delta_t, gamma_t, membership_family, transform_t, FunctionFamily, IntervalSet, PairProduct,
    PartitionSpec, WeightFn,
};
use crate::mc_engine::{batch_means, EstimatorConfig, PairedEstimate};
use crate::measure::{GibbsMeasure, Point};
use serde_json::json;
use std::time::Instant;

/// `(φ(R^n, W), φ(R^n, T(W)) exp Σ_l F_l / ⟨exp F⟩^n)` for one tuple, with
/// `φ = Φ(R^n) g(W)`.
pub fn weight_values<M: GibbsMeasure<f64>>(
    measure: &M,
    family: &FunctionFamily<f64>,
    partition: &PartitionSpec<f64>,
    phi_r: &PairProduct<f64>,
    phi_w: &WeightFn<f64>,
    tuple: &[Point],
) -> (f64, f64) {
    let p = phi_r.eval_points(measure, tuple);
    if p == 0.0 {
        return (0.0, 0.0);
    }
    let w = partition.weights(measure, tuple);
    let tw = apply_t(partition, family, measure, tuple);
    let log_density = family.sum_f_l(measure, tuple) - family.n() as f64 * tw.log_norm;
    (p * phi_w.eval(&w), p * phi_w.eval(&tw.weights) * log_density.exp())
}

/// `E⟨φ(R^n, W)⟩ = E⟨φ(R^n, T(W)) exp Σ_l F_l / ⟨exp F⟩^n⟩`.
pub fn check_weight_invariance(
    target: &Target,
    family: &FunctionFamily<f64>,
    partition: &PartitionSpec<f64>,
    phi_r: &PairProduct<f64>,
    phi_w: &WeightFn<f64>,
    config: &EstimatorConfig,
) -> Result<IdentityReport> {
    let n = family.n();
    if n == 0 {
        return invalid("the family needs at least one function");
    }
    partition.validate(n)?;
    phi_w.validate(partition.n_sets())?;
    if phi_r.max_index() > n {
        return invalid(format!("Φ references replica {} but n = {n}", phi_r.max_index()));
    }
    let start = Instant::now();
    let recs = run_records(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(n, s);
        Ok(weight_values(&m, family, partition, phi_r, phi_w, &tuple))
    })?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = recs.into_iter().unzip();
    let est = PairedEstimate::from_values(&lhs, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("weights", &est, config)
        .with_details(json!({ "n": n, "n_sets": partition.n_sets() }))
        .timed(start, config))
}

/// The event `{R_{l,l'} ∈ C_{l,l'} for all l < l' ≤ n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvent {
    conds: Vec<(usize, usize, IntervalSet<f64>)>,
}

impl PairEvent {
    pub fn new(conds: Vec<(usize, usize, IntervalSet<f64>)>) -> Result<Self> {
        for (l, lp, _) in &conds {
            if *l == 0 || l >= lp {
                return invalid(format!("pair ({l},{lp}) must satisfy 1 <= l < l'"));
            }
        }
        Ok(Self { conds })
    }

    pub fn conds(&self) -> &[(usize, usize, IntervalSet<f64>)] {
        &self.conds
    }

    pub fn contains<M: GibbsMeasure<f64>>(&self, measure: &M, tuple: &[Point]) -> bool {
        self.conds
            .iter()
            .all(|(l, lp, set)| set.contains(measure.overlap(tuple[l - 1], tuple[lp - 1])))
    }

    /// Checks `B ⊆ Π_{l<l'} B_l ∩ B_{l'}`: every pair is constrained to a
    /// subset of `B_l ∩ B_{l'}`.
    pub fn validate_against(&self, sets: &[IntervalSet<f64>]) -> Result<()> {
        let n = sets.len();
        for l in 1..=n {
            for lp in l + 1..=n {
                let found: Vec<_> = self.conds.iter().filter(|(a, b, _)| *a == l && *b == lp).collect();
                if found.is_empty() {
                    return invalid(format!("the event leaves R_{{{l},{lp}}} unconstrained"));
                }
                if !found
                    .iter()
                    .any(|(_, _, c)| c.is_subset_of_both(&sets[l - 1], &sets[lp - 1]))
                {
                    return invalid(format!("the condition on R_{{{l},{lp}}} is not inside B_{l} ∩ B_{lp}"));
                }
            }
        }
        if let Some((l, lp, _)) = self.conds.iter().find(|(_, lp, _)| *lp > n) {
            return invalid(format!("pair ({l},{lp}) exceeds n = {n}"));
        }
        Ok(())
    }
}

/// Inputs of the closed-form weight identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Th2aInputs {
    /// `B_1, …, B_n`.
    pub sets: Vec<IntervalSet<f64>>,
    /// The event `B` on `R^n`.
    pub event: PairEvent,
    pub t: Vec<f64>,
    pub phi: WeightFn<f64>,
}

impl Th2aInputs {
    pub fn validate(&self) -> Result<()> {
        let n = self.sets.len();
        if n == 0 || n > 16 {
            return invalid("between 1 and 16 sets are supported");
        }
        if self.t.len() != n {
            return invalid(format!("expected {n} t values, got {}", self.t.len()));
        }
        self.event.validate_against(&self.sets)?;
        self.phi.validate(1 << n)
    }
}

/// `(I(R^n∈B) φ(W), I(R^n∈B) φ(T_t(W)) e^{γ_t} / Δ_t^n, general-path value)`.
pub fn th2a_values<M: GibbsMeasure<f64>>(
    measure: &M,
    inputs: &Th2aInputs,
    gamma: f64,
    family: &FunctionFamily<f64>,
    tuple: &[Point],
) -> (f64, f64, f64) {
    if !inputs.event.contains(measure, tuple) {
        return (0.0, 0.0, 0.0);
    }
    let n = inputs.sets.len();
    let partition = PartitionSpec::Membership(inputs.sets.clone());
    let w = partition.weights(measure, tuple);
    let closed =
        inputs.phi.eval(&transform_t(&w, &inputs.t)) * gamma.exp() / delta_t(&w, &inputs.t).powi(n as i32);
    let (lhs, general) = weight_values(measure, family, &partition, &PairProduct::one(), &inputs.phi, tuple);
    (lhs, closed, general)
}

/// `E⟨I(R^n∈B) φ(W)⟩ = E⟨I(R^n∈B) φ(T_t(W)) e^{γ_t} / Δ_t^n⟩`, with the
/// general `T` path evaluated alongside and required to agree per sample.
pub fn check_th2a(target: &Target, inputs: &Th2aInputs, config: &EstimatorConfig) -> Result<IdentityReport> {
    inputs.validate()?;
    let n = inputs.sets.len();
    let mu = target.mu();
    let gamma = gamma_t(&inputs.t, &inputs.sets, &mu);
    let family = membership_family(&inputs.t, &inputs.sets, &mu);
    let start = Instant::now();
    let recs = run_records(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(n, s);
        Ok(th2a_values(&m, inputs, gamma, &family, &tuple))
    })?;
    let max_gap = recs
        .iter()
        .map(|(_, c, g)| (c - g).abs() / c.abs().max(1.0))
        .fold(0.0, f64::max);
    let lhs: Vec<f64> = recs.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = recs.iter().map(|r| r.1).collect();
    let est = PairedEstimate::from_values(&lhs, &rhs, config.n_batches);
    Ok(IdentityReport::from_estimate("th2a", &est, config)
        .with_details(json!({ "gamma": gamma, "t": inputs.t, "max_rel_path_gap": max_gap }))
        .require(max_gap <= 1e-10)
        .timed(start, config))
}

/// `E⟨I(R_{1,2} ≥ q) / (W_3 + W_4)²⟩` against `μ([q, 1])`, plus the pre-limit
/// values `E⟨I(R_{1,2} ≥ q) / (W_1 e^{-s} + W_2 e^{-s} + W_3 + W_4)²⟩` for each `s`,
/// which must be nondecreasing in `s` up to noise.
pub fn check_prop1(target: &Target, q: f64, s_values: &[f64], config: &EstimatorConfig) -> Result<IdentityReport> {
    if s_values.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("s values must be strictly increasing");
    }
    let start = Instant::now();
    let set = IntervalSet::at_least(q);
    let partition = PartitionSpec::Membership(vec![set.clone(), set.clone()]);
    let recs = run_records(config, |s| {
        let m = target.realize(s)?;
        let tuple = m.sample_replicas(2, s);
        let mut out = vec![0.0; s_values.len() + 2];
        if set.contains(m.overlap(tuple[0], tuple[1])) {
            let w = crate::functionals::to_four_sets(&partition.weights(&m, &tuple));
            out[0] = 1.0 / (w[2] + w[3]).powi(2);
            for (k, &sv) in s_values.iter().enumerate() {
                let e = (-sv).exp();
                out[k + 1] = 1.0 / (w[0] * e + w[1] * e + w[2] + w[3]).powi(2);
            }
            out[s_values.len() + 1] = w[0] + w[1];
        }
        Ok(out)
    })?;
    let column = |k: usize| -> Vec<f64> { recs.iter().map(|r| r[k]).collect() };
    let limit = column(0);
    let e = batch_means(&limit, config.n_batches);
    let expected = target.mu().mass_where(|x| set.contains(x));
    let mut sweep = Vec::new();
    let mut monotone = true;
    let mut prev: Option<Vec<f64>> = None;
    for (k, &sv) in s_values.iter().enumerate() {
        let col = column(k + 1);
        let b = batch_means(&col, config.n_batches);
        if let Some(p) = &prev {
            let diff: Vec<f64> = col.iter().zip(p).map(|(a, b)| a - b).collect();
            let d = batch_means(&diff, config.n_batches);
            monotone &= d.mean >= -3.0 * d.se - 1e-12;
        }
        sweep.push(json!({ "s": sv, "mean": b.mean, "se": b.se }));
        prev = Some(col);
    }
    if let Some(p) = &prev {
        let diff: Vec<f64> = limit.iter().zip(p).map(|(a, b)| a - b).collect();
        let d = batch_means(&diff, config.n_batches);
        monotone &= d.mean >= -3.0 * d.se - 1e-12;
    }
    let max_w12 = column(s_values.len() + 1).into_iter().fold(0.0, f64::max);
    let est = PairedEstimate {
        mean_lhs: e.mean,
        mean_rhs: expected,
        se_lhs: e.se,
        se_rhs: 0.0,
        se_diff: e.se,
        n: limit.len(),
    };
    Ok(IdentityReport::from_estimate("prop1", &est, config)
        .with_details(json!({ "q": q, "sweep": sweep, "monotone": monotone, "max_w1_plus_w2": max_w12 }))
        .require(monotone)
        .timed(start, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeSpec;
    use crate::functionals::StepFunction;

    fn cfg(n: usize) -> EstimatorConfig {
        EstimatorConfig::default().with_n_outer(n).with_seed(9)
    }

    fn two_level() -> Target {
        Target::Cascade(CascadeSpec::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], vec![32, 128]).unwrap())
    }

    #[test]
    fn event_constraint() {
        let sets = vec![IntervalSet::at_least(0.4), IntervalSet::at_least(0.4)];
        let ok = PairEvent::new(vec![(1, 2, IntervalSet::at_least(0.5))]).unwrap();
        assert!(ok.validate_against(&sets).is_ok());
        let bad = PairEvent::new(vec![(1, 2, IntervalSet::at_least(0.3))]).unwrap();
        assert!(bad.validate_against(&sets).is_err());
        let missing = PairEvent::new(vec![]).unwrap();
        assert!(missing.validate_against(&sets).is_err());
        assert!(PairEvent::new(vec![(2, 1, IntervalSet::everything())]).is_err());
    }

    #[test]
    fn zero_t_is_sample_identical() {
        let inputs = Th2aInputs {
            sets: vec![IntervalSet::at_least(0.4), IntervalSet::at_least(0.4)],
            event: PairEvent::new(vec![(1, 2, IntervalSet::at_least(0.4))]).unwrap(),
            t: vec![0.0, 0.0],
            phi: WeightFn::Component(0b11),
        };
        let r = check_th2a(&two_level(), &inputs, &cfg(320)).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn general_and_closed_paths_agree() {
        let inputs = Th2aInputs {
            sets: vec![IntervalSet::at_least(0.4), IntervalSet::at_least(1.0)],
            event: PairEvent::new(vec![(1, 2, IntervalSet::at_least(1.0))]).unwrap(),
            t: vec![0.6, 0.3],
            phi: WeightFn::Monomial(vec![1, 0, 1, 1]),
        };
        let r = check_th2a(&two_level(), &inputs, &cfg(640)).unwrap();
        let gap = r.details.as_ref().unwrap()["max_rel_path_gap"].as_f64().unwrap();
        assert!(gap <= 1e-10, "{gap}");
    }

    #[test]
    fn zero_family_weight_check() {
        let part = PartitionSpec::Membership(vec![IntervalSet::at_least(0.4); 2]);
        let phi_r = PairProduct::single(1, 2, StepFunction::at_least(0.4, 1.0).into()).unwrap();
        let r = check_weight_invariance(
            &two_level(),
            &FunctionFamily::zeros(2),
            &part,
            &phi_r,
            &WeightFn::Component(0),
            &cfg(320),
        )
        .unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
    }

    #[test]
    fn prop1_above_top_level_is_zero() {
        let r = check_prop1(&two_level(), 1.01, &[0.5, 1.0], &cfg(320)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(r.pass);
    }
}
