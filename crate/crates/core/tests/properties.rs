use gglab::finite_oracle::FiniteMeasure;
use gglab::functionals::{FunctionFamily, IntervalSet, OverlapFn, PairProduct, StepFunction};
use gglab::identity_checks::main_values;
use gglab::mc_engine::{derive_stream, run_samples, EstimatorConfig, OUTER_LANE};
use gglab::measure::{GibbsMeasure, Point};
use gglab::structural_checks::{greedy_sequence, packing_bound};
use proptest::prelude::*;

/// Vectors inside the unit ball and positive weights.
fn psd_measure() -> impl Strategy<Value = FiniteMeasure<f64>> {
    (1usize..=4, 2usize..=6).prop_flat_map(|(d, m)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), m),
            prop::collection::vec(0.01f64..1.0, m),
        )
            .prop_map(|(vecs, w)| {
                let vecs: Vec<Vec<f64>> = vecs
                    .into_iter()
                    .map(|v| {
                        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if n > 1.0 { v.iter().map(|x| x / n).collect() } else { v }
                    })
                    .collect();
                let m = vecs.len();
                let gram = (0..m * m)
                    .map(|k| vecs[k / m].iter().zip(&vecs[k % m]).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0))
                    .collect();
                FiniteMeasure::from_unnormalized(w, gram).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sequences_respect_packing_bound(m in psd_measure(), eps in 0.02f64..1.0) {
        let b = IntervalSet::parse(&format!("[-1,{}]", -eps)).unwrap();
        let bound = packing_bound(&b).unwrap();
        for a in 0..m.len() {
            let seq = greedy_sequence(&m, &b, Point { atom: a as u32, tag: 0 }, 100);
            prop_assert!(seq.len() as f64 <= bound + 1e-9);
            for i in 0..seq.len() {
                for j in 0..i {
                    prop_assert!(b.contains(m.overlap(seq[i], seq[j])));
                }
            }
        }
    }

    #[test]
    fn zero_family_gives_equal_sides(m in psd_measure(), seed in 0u64..1000, q in -0.5f64..0.9) {
        let fam = FunctionFamily::<f64>::zeros(3);
        let phi = PairProduct::single(1, 3, OverlapFn::indicator(IntervalSet::at_least(q), 1.0)).unwrap();
        let mut s = derive_stream(seed, OUTER_LANE, 0);
        let tuple = m.sample_replicas(3, &mut s);
        let (a, b) = main_values(&m, &fam, &phi, &tuple);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn step_functions_are_right_continuous(mut breaks in prop::collection::vec(-0.99f64..1.0, 0..5), vals in prop::collection::vec(-3.0f64..3.0, 6)) {
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks.insert(0, -1.0);
        let vals = vals[..breaks.len()].to_vec();
        let f = StepFunction::new(breaks.clone(), vals.clone()).unwrap();
        for (b, v) in breaks.iter().zip(&vals) {
            prop_assert_eq!(f.eval(*b), *v);
        }
        prop_assert!(f.bound() >= vals.iter().fold(0.0f64, |a, v| a.max(v.abs())) - 1e-15);
    }

    #[test]
    fn worker_count_does_not_change_samples(seed in any::<u64>(), workers in 2usize..9) {
        let base = EstimatorConfig::default().with_n_outer(256).with_seed(seed);
        let draw = |_: u64, s: &mut gglab::mc_engine::Stream| rand::Rng::random::<u64>(s);
        let one = run_samples(&base, draw).unwrap();
        let many = run_samples(&base.clone().with_workers(workers), draw).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn interval_sets_round_trip(lo in -1.0f64..0.0, hi in 0.0f64..1.0, closed in any::<bool>()) {
        let text = if closed { format!("[{lo},{hi}]") } else { format!("({lo},{hi})") };
        let s = IntervalSet::<f64>::parse(&text).unwrap();
        let again = IntervalSet::<f64>::parse(&s.to_string()).unwrap();
        prop_assert_eq!(s.contains(lo), closed);
        prop_assert_eq!(again.contains(lo), closed);
        prop_assert!(again.contains((lo + hi) / 2.0) || lo == hi);
    }
}
