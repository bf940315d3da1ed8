use gglab::finite_oracle::{exact_average, exact_inner_exp_average, for_each_tuple, FiniteMeasure, DEFAULT_BUDGET};
use gglab::functionals::{FunctionFamily, IntervalSet, OverlapFn, PairProduct};
use gglab::identity_checks::{check_gg, check_gg_exact, check_main, check_main_exact, main_values, Target};
use gglab::mc_engine::{derive_stream, EstimatorConfig, OUTER_LANE};
use gglab::measure::GibbsMeasure;
use gglab::structural_checks::exact_ultrametric_violation;

fn non_ultrametric() -> FiniteMeasure<f64> {
    FiniteMeasure::from_unnormalized(vec![1.0, 1.0, 1.0], vec![1.0, 0.8, 0.8, 0.8, 1.0, 0.2, 0.8, 0.2, 1.0]).unwrap()
}

fn mixed() -> FiniteMeasure<f64> {
    FiniteMeasure::from_unnormalized(
        vec![0.4, 0.3, 0.2, 0.1],
        vec![1.0, 0.6, 0.1, 0.0, 0.6, 1.0, 0.1, 0.0, 0.1, 0.1, 0.9, 0.3, 0.0, 0.0, 0.3, 0.8],
    )
    .unwrap()
}

#[test]
fn tuple_weights_sum_to_one() {
    let m = mixed();
    let mut total = 0.0;
    let mut count = 0;
    for_each_tuple(&m, 3, DEFAULT_BUDGET, |_, w| {
        total += w;
        count += 1;
    })
    .unwrap();
    assert_eq!(count, 64);
    assert!((total - 1.0).abs() < 1e-14);
    assert!(for_each_tuple(&m, 3, 10, |_, _| {}).is_err());
}

#[test]
fn violation_mass_of_three_point_measure() {
    let m = non_ultrametric();
    let v = exact_ultrametric_violation(&m, Some(0.5)).unwrap();
    assert!((v - 2.0 / 9.0).abs() < 1e-14);
    let r12 = exact_average(&m, 2, |r| r.get(0, 1)).unwrap();
    assert!((r12 - (3.0 + 2.0 * (0.8 + 0.8 + 0.2)) / 9.0).abs() < 1e-14);
}

#[test]
fn sampled_values_match_enumeration() {
    let m = mixed();
    let fam = FunctionFamily::new(
        vec![
            OverlapFn::indicator(IntervalSet::at_least(0.5), 0.7),
            OverlapFn::indicator(IntervalSet::below(0.2), -1.2),
        ],
        &m.exact_mu(),
    );
    let phi = PairProduct::single(1, 2, OverlapFn::indicator(IntervalSet::at_least(0.1), 1.0)).unwrap();
    for i in 0..200 {
        let mut s = derive_stream(9, OUTER_LANE, i);
        let tuple = m.sample_replicas(2, &mut s);
        let inner = exact_inner_exp_average(&m, &tuple, |ov| {
            ov.iter().zip(fam.functions()).map(|(&x, f)| f.eval(x)).sum()
        });
        let mc = fam.log_inner_exp(&m, &tuple).exp();
        assert!((inner - mc).abs() <= 1e-12 * inner);
        let (_, rhs) = main_values(&m, &fam, &phi, &tuple);
        let expect = phi.eval_points(&m, &tuple) * fam.sum_f_l(&m, &tuple).exp() / (inner * inner);
        assert!((rhs - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
    }
}

#[test]
fn monte_carlo_converges_to_exact_sides() {
    let m = mixed();
    let cfg = EstimatorConfig::default().with_n_outer(32_000).with_seed(4);
    let fam = FunctionFamily::new(
        vec![OverlapFn::indicator(IntervalSet::at_least(0.5), 1.0), OverlapFn::constant(-0.3)],
        &m.exact_mu(),
    );
    let phi = PairProduct::single(1, 2, OverlapFn::indicator(IntervalSet::at_least(0.5), 1.0)).unwrap();
    let exact = check_main_exact(&m, &fam, &phi, &cfg).unwrap();
    let mc = check_main(&Target::Finite(m.clone()), &fam, &phi, &cfg).unwrap();
    assert!((mc.lhs - exact.lhs).abs() < 4.0 * mc.se_lhs);
    assert!((mc.rhs - exact.rhs).abs() < 4.0 * mc.se_rhs);

    let psi = OverlapFn::indicator(IntervalSet::at_least(0.5), 1.0);
    let f = PairProduct::single(1, 2, psi.clone()).unwrap();
    let exact = check_gg_exact(&m, 2, &f, &psi, &cfg).unwrap();
    let mc = check_gg(&Target::Finite(m), 2, &f, &psi, &cfg).unwrap();
    assert!((mc.lhs - exact.lhs).abs() < 4.0 * mc.se_lhs);
    assert!((mc.rhs - exact.rhs).abs() < 4.0 * mc.se_rhs);
}

#[test]
fn measure_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.txt");
    std::fs::write(&p, "# weights then gram\n2 1 1\n1 0.5 0\n0.5 1 0\n0 0 1\n").unwrap();
    let m = FiniteMeasure::<f64>::load(&p).unwrap();
    assert_eq!(m.weights(), &[0.5, 0.25, 0.25]);
    std::fs::write(&p, "1 1\n1 0.5\n0.4 1\n").unwrap();
    assert!(FiniteMeasure::<f64>::load(&p).is_err());
}
