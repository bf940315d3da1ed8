//! The acceptance battery, grouped by criterion.
//!
//! Each criterion returns one report per case; report names carry the
//! criterion number and a case label, e.g. `c2/gg/two-level/n3-mixed`.
//! Sample sizes scale with `config.n_outer` (the full size), so a small
//! `n_outer` gives a fast smoke run of the same battery.

use crate::cascade::CascadeSpec;
use crate::error::{invalid, Result};
use crate::finite_oracle::{exact_inner_exp_average, FiniteMeasure};
use crate::functionals::{
    from_four_sets, membership_family, FunctionFamily, Groups, IntervalSet, OverlapFn, PairProduct,
    PartitionSpec, StepFunction, WeightFn,
};
use crate::identity_checks::{
    check_gg, check_iterated, check_iterated_pd_example, check_main, check_pd_identity, check_prop1,
    check_th2a, check_weight_invariance, check_zeta, main_values, IdentityReport, PairEvent, Target,
    Th2aInputs,
};
use crate::mc_engine::{derive_stream, run_samples, EstimatorConfig, AUX_LANE};
use crate::measure::{GibbsMeasure, Point};
use crate::structural_checks::{
    check_exchangeability, check_positivity, check_prop2, check_ultrametric, count_report, greedy_sequence,
    packing_bound, ExchangeOptions,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

/// Number of acceptance criteria.
pub const CRITERIA: usize = 13;

/// Worker counts compared by the reproducibility criterion.
pub const WORKER_COUNTS: [usize; 3] = [1, 2, 8];

/// Configuration with `n` outer samples, rounded up to whole batches.
fn sized(config: &EstimatorConfig, n: usize) -> EstimatorConfig {
    let nb = config.n_batches.max(1);
    let n = n.max(nb).div_ceil(nb) * nb;
    config.clone().with_n_outer(n)
}

fn label(criterion: usize, case: &str, mut r: IdentityReport) -> IdentityReport {
    r.name = format!("c{criterion}/{case}");
    r
}

/// Passes iff the wrapped check failed.
fn negative_control(criterion: usize, case: &str, mut r: IdentityReport) -> IdentityReport {
    r.pass = !r.pass;
    label(criterion, case, r)
}

fn within(r: IdentityReport, k: f64) -> IdentityReport {
    let ok = r.z.abs() <= k;
    r.require(ok)
}

fn ind(set: IntervalSet<f64>) -> OverlapFn<f64> {
    OverlapFn::indicator(set, 1.0)
}

fn ge(q: f64) -> OverlapFn<f64> {
    ind(IntervalSet::at_least(q))
}

fn lt(q: f64) -> OverlapFn<f64> {
    ind(IntervalSet::below(q))
}

fn step(breaks: &[f64], vals: &[f64]) -> OverlapFn<f64> {
    OverlapFn::Step(StepFunction::new(breaks.to_vec(), vals.to_vec()).expect("valid step function"))
}

fn pairs(factors: Vec<(usize, usize, OverlapFn<f64>)>) -> PairProduct<f64> {
    PairProduct::new(factors).expect("valid replica pairs")
}

/// One level, ζ = 0.5, overlaps {0, 1}.
pub fn one_level() -> Target {
    Target::Cascade(CascadeSpec::single_level(0.5, 0.0, 1.0, 4096).expect("valid cascade"))
}

/// Two levels, ζ = (0.3, 0.7), overlaps {0, 0.5, 1}.
pub fn two_level_spec() -> CascadeSpec<f64> {
    CascadeSpec::new(vec![0.3, 0.7], vec![0.0, 0.5, 1.0], vec![128, 1024]).expect("valid cascade")
}

pub fn two_level() -> Target {
    Target::Cascade(two_level_spec())
}

/// Three levels, ζ = (0.2, 0.5, 0.8), overlaps {0, 0.3, 0.6, 1}.
pub fn three_level() -> Target {
    Target::Cascade(
        CascadeSpec::new(vec![0.2, 0.5, 0.8], vec![0.0, 0.3, 0.6, 1.0], vec![16, 128, 1024]).expect("valid cascade"),
    )
}

/// Runs one criterion.
pub fn criterion(k: usize, config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    config.validate()?;
    match k {
        1 => second_moment(config),
        2 => gg_catalog(config),
        3 => main_catalog(config),
        4 => iterated_catalog(config),
        5 => weight_catalog(config),
        6 => prop1(config),
        7 => pd_identities(config),
        8 => ultrametricity(config),
        9 => positivity(config),
        10 => prop2_catalog(config),
        11 => exchangeability(config),
        12 => oracle_equivalence(config),
        13 => reproducibility(config),
        _ => invalid(format!("criteria are numbered 1..={CRITERIA}")),
    }
}

/// Runs every criterion in order.
pub fn run_suite(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for k in 1..=CRITERIA {
        out.extend(criterion(k, config)?);
    }
    Ok(out)
}

fn second_moment(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    [0.2, 0.5, 0.8]
        .iter()
        .map(|&zeta| {
            let r = check_zeta(zeta, config)?;
            let ok = (r.lhs - r.rhs).abs() <= (3.0 * r.se_lhs).max(0.01);
            let mut r = label(1, &format!("zeta/{zeta}"), r);
            r.pass = ok;
            Ok(r)
        })
        .collect()
}

fn gg_catalog(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let mixed = || step(&[-1.0, 0.25, 0.75], &[-1.0, 0.5, 2.0]);
    let cases: Vec<(&str, Target, usize, PairProduct<f64>, OverlapFn<f64>)> = vec![
        ("one-level/n2-const", one_level(), 2, PairProduct::one(), ge(1.0)),
        ("one-level/n2-diag", one_level(), 2, pairs(vec![(1, 2, ge(1.0))]), ge(1.0)),
        ("one-level/n3-step", one_level(), 3, pairs(vec![(1, 2, ge(1.0)), (2, 3, lt(1.0))]), step(&[-1.0, 0.5], &[-0.5, 2.0])),
        ("two-level/n2-inner", two_level(), 2, pairs(vec![(1, 2, ge(0.5))]), ge(0.5)),
        ("two-level/n3-nested", two_level(), 3, pairs(vec![(1, 2, ge(0.5)), (1, 3, ge(1.0))]), ge(1.0)),
        ("two-level/n3-mixed", two_level(), 3, pairs(vec![(2, 3, lt(0.5))]), mixed()),
        ("three-level/n3", three_level(), 3, pairs(vec![(1, 2, ge(0.3))]), ge(0.6)),
    ];
    cases
        .into_iter()
        .map(|(case, t, n, f, psi)| Ok(label(2, &format!("gg/{case}"), check_gg(&t, n, &f, &psi, config)?)))
        .collect()
}

fn main_catalog(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let c = |v: f64| OverlapFn::constant(v);
    let cases: Vec<(&str, Target, Vec<OverlapFn<f64>>, PairProduct<f64>)> = vec![
        ("one-level/n2-diag", one_level(), vec![ge(1.0), ge(1.0)], pairs(vec![(1, 2, ge(1.0))])),
        ("one-level/n1", one_level(), vec![ge(1.0).scaled(0.7)], PairProduct::one()),
        ("two-level/n2-signs", two_level(), vec![ge(0.5), ge(1.0).scaled(-1.0)], pairs(vec![(1, 2, ge(0.5))])),
        (
            "two-level/n3-mixed",
            two_level(),
            vec![ge(0.5).scaled(0.5), ge(1.0).scaled(-0.8), c(0.3)],
            pairs(vec![(1, 2, ge(0.5)), (2, 3, lt(1.0))]),
        ),
        (
            "two-level/n3-step",
            two_level(),
            vec![step(&[-1.0, 0.25, 0.75], &[-0.5, 0.2, 0.6]), lt(0.5).scaled(-1.0), ge(1.0).scaled(0.4)],
            pairs(vec![(1, 3, ge(0.5))]),
        ),
        ("three-level/n2", three_level(), vec![ge(0.3), ge(0.6).scaled(-0.5)], pairs(vec![(1, 2, ge(0.6))])),
    ];
    let mut out = cases
        .into_iter()
        .map(|(case, t, f, phi)| {
            let fam = FunctionFamily::new(f, &t.mu());
            Ok(label(3, &format!("main/{case}"), check_main(&t, &fam, &phi, config)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(zero_family_gap(config)?);
    Ok(out)
}

/// With `f ≡ 0` both sides of the main identity agree sample by sample.
fn zero_family_gap(config: &EstimatorConfig) -> Result<IdentityReport> {
    let t = two_level();
    let fam = FunctionFamily::zeros(3);
    let phi = pairs(vec![(1, 2, ge(0.5)), (2, 3, lt(1.0))]);
    let cfg = sized(config, config.n_outer / 10);
    let gaps = run_samples(&cfg, |_, s| -> Result<f64> {
        let m = t.realize(s)?;
        let tuple = m.sample_replicas(3, s);
        let (a, b) = main_values(&m, &fam, &phi, &tuple);
        Ok((a - b).abs())
    })?
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    let mut r = IdentityReport::exact("c3/main/zero-family", worst, 0.0, gaps.len(), &cfg);
    r.pass = worst <= 1e-12;
    Ok(r.with_details(json!({ "max_abs_gap": worst })))
}

fn iterated_catalog(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let cases: Vec<(&str, Target, Vec<usize>, Vec<OverlapFn<f64>>, PairProduct<f64>)> = vec![
        (
            "two-level/1+2",
            two_level(),
            vec![1, 2],
            vec![ge(0.5), ge(1.0).scaled(-0.5), ge(0.5).scaled(0.4)],
            pairs(vec![(2, 3, ge(0.5))]),
        ),
        (
            "two-level/2+2",
            two_level(),
            vec![2, 2],
            vec![ge(0.5).scaled(0.6), lt(0.5).scaled(-0.4), ge(1.0).scaled(0.5), ge(0.5).scaled(-0.3)],
            pairs(vec![(3, 4, ge(1.0))]),
        ),
    ];
    let mut out = cases
        .into_iter()
        .map(|(case, t, sizes, f, phi)| {
            let fam = FunctionFamily::new(f, &t.mu());
            let groups = Groups::from_sizes(&sizes)?;
            Ok(label(4, &format!("iterated/{case}"), check_iterated(&t, &fam, &groups, &phi, config)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(label(4, "iterated/pd-example", check_iterated_pd_example(0.5, 0.5, 4096, config)?));
    Ok(out)
}

/// `φ(W) = (W_1 e^{-s} + W_2 e^{-s} + W_3 + W_4)^{-2}` in bitmask order.
pub fn n2_weight_fn(s: f64) -> WeightFn<f64> {
    let e = (-s).exp();
    WeightFn::LinearPower { coeffs: from_four_sets([e, e, 1.0, 1.0]), power: -2.0 }
}

fn weight_catalog(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let t = two_level();
    let mu = t.mu();
    let q = 0.5;
    let sets = vec![IntervalSet::at_least(q), IntervalSet::at_least(q)];
    let mut out = Vec::new();
    for s in [0.5, 1.0] {
        let tv = [s, -s];
        let fam = membership_family(&tv, &sets, &mu);
        let phi_r = pairs(vec![(1, 2, ge(q))]);
        let r = check_weight_invariance(&t, &fam, &PartitionSpec::Membership(sets.clone()), &phi_r, &n2_weight_fn(s), config)?;
        out.push(label(5, &format!("weights/n2/s={s}"), r));
        let inputs = Th2aInputs {
            sets: sets.clone(),
            event: PairEvent::new(vec![(1, 2, IntervalSet::at_least(q))])?,
            t: tv.to_vec(),
            phi: n2_weight_fn(s),
        };
        out.push(label(5, &format!("th2a/n2/s={s}"), check_th2a(&t, &inputs, config)?));
    }
    let inputs = Th2aInputs {
        sets: vec![IntervalSet::at_least(0.5), IntervalSet::at_least(0.5), IntervalSet::at_least(1.0)],
        event: PairEvent::new(vec![
            (1, 2, IntervalSet::at_least(0.5)),
            (1, 3, IntervalSet::at_least(1.0)),
            (2, 3, IntervalSet::at_least(1.0)),
        ])?,
        t: vec![0.3, -0.2, 0.4],
        phi: WeightFn::Component(0b100),
    };
    out.push(label(5, "th2a/n3", check_th2a(&t, &inputs, config)?));
    let split = vec![IntervalSet::at_least(q), IntervalSet::everything()];
    let tv = [0.7, -0.3];
    let inputs = Th2aInputs {
        sets: split.clone(),
        event: PairEvent::new(vec![(1, 2, IntervalSet::at_least(q))])?,
        t: tv.to_vec(),
        phi: WeightFn::LinearPower { coeffs: vec![1.0, 2.0, 0.0, 0.0], power: -1.0 },
    };
    out.push(label(5, "th2a/n2-split", check_th2a(&t, &inputs, config)?));
    let fam = membership_family(&[1.0, -1.0], &sets, &mu);
    let r = check_weight_invariance(
        &t,
        &fam,
        &PartitionSpec::Membership(sets.clone()),
        &pairs(vec![(1, 2, lt(q))]),
        &n2_weight_fn(1.0),
        config,
    )?;
    out.push(label(5, "weights/n2-disjoint", r));
    Ok(out)
}

fn prop1(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let r = check_prop1(&two_level(), 0.5, &[0.5, 1.0, 2.0, 4.0], config)?;
    Ok(vec![label(6, "prop1/two-level", within(r, 3.0))])
}

fn pd_identities(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let zeta = 0.5;
    let pair = check_pd_identity(zeta, &[1, 1], &[0.5, -0.5], config)?;
    let near_zeta = (pair.lhs - zeta).abs() <= 3.0 * pair.se_lhs;
    let single = check_pd_identity(zeta, &[2], &[0.3, 0.3], config)?;
    Ok(vec![
        label(7, "pd/n2-r2", pair.require(near_zeta)),
        label(7, "pd/r1-n2", single),
    ])
}

fn ultrametricity(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    Ok(vec![
        label(8, "ultra/two-level", check_ultrametric(&two_level(), None, config)?),
        label(8, "ultra/two-level/q=0.5", check_ultrametric(&two_level(), Some(0.5), config)?),
        label(8, "ultra/three-level", check_ultrametric(&three_level(), None, config)?),
    ])
}

/// Deterministic corpus of small finite measures with PSD Gram matrices:
/// random vectors inside the unit ball and regular simplices.
pub fn psd_corpus(seed: u64, count: usize) -> Vec<FiniteMeasure<f64>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = derive_stream(seed, AUX_LANE, i as u64);
        let m = rng.random_range(2..=6usize);
        let vecs: Vec<Vec<f64>> = if i % 4 == 3 {
            (0..m)
                .map(|a| {
                    let mut v: Vec<f64> = (0..m).map(|k| if k == a { 1.0 } else { 0.0 } - 1.0 / m as f64).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= norm);
                    v
                })
                .collect()
        } else {
            let d = rng.random_range(1..=4usize);
            (0..m)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                    let r = rng.random_range(0.3..=1.0);
                    v.iter().map(|x| x * r / norm).collect()
                })
                .collect()
        };
        let gram = (0..m * m)
            .map(|k| {
                let (a, b) = (k / m, k % m);
                vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
            })
            .collect();
        let weights = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        out.push(FiniteMeasure::from_unnormalized(weights, gram).expect("valid corpus measure"));
    }
    out
}

fn positivity(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for (case, t) in [("one-level", one_level()), ("two-level", two_level())] {
        let mut r = check_positivity(&t, 0.1, 3, config)?;
        let ok = r.lhs == 0.0;
        r = r.require(ok);
        out.push(label(9, &format!("positivity/{case}"), r));
    }
    let corpus = psd_corpus(config.seed, 400);
    let (mut violations, mut trials, mut tight) = (0usize, 0usize, 0usize);
    for m in &corpus {
        let simplex = -1.0 / (m.len() as f64 - 1.0);
        for eps in [0.05, 0.1, 0.2, 0.5, -simplex] {
            let b = IntervalSet::parse(&format!("[-1,{}]", -eps))?;
            let bound = packing_bound(&b).expect("negative supremum");
            for a in 0..m.len() {
                let len = greedy_sequence(m, &b, Point { atom: a as u32, tag: 0 }, 64).len();
                trials += 1;
                violations += usize::from(len as f64 > bound + 1e-9);
                tight += usize::from(len as f64 >= bound - 1e-9);
            }
        }
    }
    out.push(count_report(
        "c9/sequence/psd-corpus",
        violations,
        trials,
        config,
        json!({ "measures": corpus.len(), "sequences": trials, "violations": violations, "at_bound": tight }),
    ));
    Ok(out)
}

fn prop2_catalog(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let cfg = sized(config, config.n_outer / 10);
    let cases: Vec<(&str, Target, Vec<OverlapFn<f64>>)> = vec![
        ("one-level/n2", one_level(), vec![ge(1.0), ge(1.0).scaled(-1.0)]),
        ("two-level/n2", two_level(), vec![ge(0.5), ge(1.0).scaled(-0.7)]),
        ("two-level/n3", two_level(), vec![ge(0.5).scaled(0.5), lt(0.5), ge(1.0).scaled(-1.0)]),
        ("three-level/n2", three_level(), vec![step(&[-1.0, 0.3, 0.6], &[0.0, 0.4, -0.9]), ge(0.6)]),
    ];
    let mut out = cases
        .into_iter()
        .map(|(case, t, f)| {
            let fam = FunctionFamily::new(f, &t.mu());
            Ok(label(10, &format!("prop2/{case}"), check_prop2(&t, &fam, &cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = FiniteMeasure::from_unnormalized(vec![1.0, 1.0, 1.0], vec![1.0, 0.8, 0.8, 0.8, 1.0, 0.2, 0.8, 0.2, 1.0])?;
    let c = IntervalSet::at_least(0.5);
    let fam = FunctionFamily::new(vec![ind(c.clone()), OverlapFn::indicator(c, -1.0)], &m.exact_mu());
    let r = check_prop2(&Target::Finite(m), &fam, &sized(config, 320))?;
    out.push(negative_control(10, "prop2/non-ultrametric-control", r));
    Ok(out)
}

fn exchangeability(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let cfg = sized(config, config.n_outer / 10);
    let opts = ExchangeOptions::new(3);
    let r = check_exchangeability(&two_level(), &opts, &cfg)?;
    let control = Target::HeavyPairShareBranch { spec: two_level_spec(), threshold: 0.3 };
    let neg = check_exchangeability(&control, &opts, &cfg)?;
    Ok(vec![
        label(11, "exchange/two-level/m=3", r),
        label(11, "exchange/one-level/m=2", check_exchangeability(&one_level(), &ExchangeOptions::new(2), &sized(config, 320))?),
        negative_control(11, "exchange/heavy-pair-control", neg),
    ])
}

fn oracle_equivalence(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let corpus = psd_corpus(config.seed ^ 0x0c1e, 50);
    let cfg = sized(config, 64);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for m in &corpus {
        let mu = m.exact_mu();
        let fam = FunctionFamily::new(vec![ge(0.5), step(&[-1.0, 0.0, 0.7], &[0.3, -0.6, 1.1]), lt(0.2).scaled(-0.8)], &mu);
        let phi = pairs(vec![(1, 2, ge(0.0))]);
        let target = Target::Finite(m.clone());
        let gaps = run_samples(&cfg, |_, s| -> Result<f64> {
            let g = target.realize(s)?;
            let tuple = g.sample_replicas(3, s);
            let inner_mc = fam.log_inner_exp(&g, &tuple).exp();
            let inner_exact = exact_inner_exp_average(m, &tuple, |ov| {
                ov.iter().zip(fam.functions()).map(|(&x, f)| f.eval(x)).sum()
            });
            let (_, rhs) = main_values(&g, &fam, &phi, &tuple);
            let rhs_exact = phi.eval_points(m, &tuple) * fam.sum_f_l(m, &tuple).exp() / inner_exact.powi(3);
            let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
            Ok(rel(inner_mc, inner_exact).max(rel(rhs, rhs_exact)))
        })?;
        for gap in gaps {
            worst = worst.max(gap?);
            count += 1;
        }
    }
    let mut eq = IdentityReport::exact("c12/oracle/per-sample", worst, 0.0, count, &cfg)
        .with_details(json!({ "measures": corpus.len(), "samples": count, "max_rel_gap": worst }));
    eq.pass = worst <= 1e-10;
    let non_gg = FiniteMeasure::from_unnormalized(vec![0.9, 0.2, 0.5, 0.1, 0.7, 0.3, 0.6, 0.4], {
        let mut g = vec![0.0; 64];
        (0..8).for_each(|i| g[i * 8 + i] = 1.0);
        g
    })?;
    let psi = ge(1.0);
    let f = pairs(vec![(1, 2, ge(1.0))]);
    let r = check_gg(&Target::Finite(non_gg), 2, &f, &psi, &sized(config, config.n_outer / 10))?;
    let rejects = r.z.abs() > config.z_max;
    let mut neg = label(12, "gg/non-gg-control", r);
    neg.pass = rejects;
    Ok(vec![eq, neg])
}

/// A small battery run at each worker count and twice at the first; passes
/// iff all serializations coincide.
fn reproducibility(config: &EstimatorConfig) -> Result<Vec<IdentityReport>> {
    let cfg = sized(config, config.n_outer / 50);
    let battery = |workers: usize| -> Result<String> {
        let c = cfg.clone().with_workers(workers);
        let fam = FunctionFamily::new(vec![ge(0.5), ge(1.0).scaled(-1.0)], &two_level().mu());
        let reports = vec![
            check_gg(&two_level(), 3, &pairs(vec![(1, 2, ge(0.5))]), &ge(1.0), &c)?,
            check_main(&two_level(), &fam, &pairs(vec![(1, 2, ge(0.5))]), &c)?,
            check_zeta(0.5, &c)?,
            check_ultrametric(&three_level(), None, &c)?,
            check_exchangeability(&two_level(), &ExchangeOptions { resamples: 100, ..ExchangeOptions::new(3) }, &c)?,
        ];
        Ok(serde_json::to_string(&reports).expect("reports serialize"))
    };
    let reference = battery(WORKER_COUNTS[0])?;
    let mut runs = vec![battery(WORKER_COUNTS[0])?];
    for &w in &WORKER_COUNTS[1..] {
        runs.push(battery(w)?);
    }
    let mismatches = runs.iter().filter(|r| **r != reference).count();
    Ok(vec![count_report(
        "c13/reproducibility/workers",
        mismatches,
        runs.len(),
        &cfg,
        json!({ "workers": WORKER_COUNTS, "runs": runs.len() + 1, "mismatches": mismatches }),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_round_to_batches() {
        let c = EstimatorConfig::default();
        assert_eq!(sized(&c, 10_000).n_outer, 10_016);
        assert_eq!(sized(&c, 1).n_outer, 32);
    }

    #[test]
    fn corpus_is_deterministic_and_psd() {
        let a = psd_corpus(3, 20);
        let b = psd_corpus(3, 20);
        assert_eq!(a.len(), 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.weights(), y.weights());
        }
        for m in &a {
            let n = m.len();
            let total: f64 = (0..n * n).map(|k| m.gram_entry(k / n, k % n)).sum();
            assert!(total >= -1e-12);
        }
    }

    #[test]
    fn unknown_criterion() {
        assert!(criterion(0, &EstimatorConfig::default()).is_err());
        assert!(criterion(14, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn smoke_runs_cheap_criteria() {
        for (k, n) in [(8, 640), (9, 640), (12, 6400)] {
            let c = EstimatorConfig::default().with_n_outer(n).with_seed(3);
            let rs = criterion(k, &c).unwrap();
            assert!(rs.iter().all(|r| r.name.starts_with(&format!("c{k}/"))));
            assert!(rs.iter().all(|r| r.pass), "{rs:?}");
        }
    }
}
