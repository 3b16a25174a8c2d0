use frtcd::combine::combine_values;
use frtcd::planner::{error_bound, required_k};
use frtcd::{CombinerSpec, Design, Mode, ObservedData, PValueFunctions, PValueKind, RandomizationTest, StatisticSpec};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = (ObservedData, Design)> {
    (4usize..9, any::<u64>()).prop_flat_map(|(n, seed)| {
        let n1 = 1 + (seed as usize) % (n - 1);
        prop::collection::vec(-5i32..6, n).prop_map(move |ys| {
            let design = Design::crd(n, n1).unwrap();
            let w = design.sampler().draw(seed, 0);
            // quarter steps keep plenty of ties
            let y = ys.iter().map(|&v| v as f64 * 0.25).collect();
            (ObservedData::new(w, y).unwrap(), design)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_functions_match_direct_p_values((data, design) in dataset(), theta in -6.0f64..6.0) {
        let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact()).unwrap();
        let f = PValueFunctions::build(&test).unwrap();
        for kind in [PValueKind::Lplus, PValueKind::Uplus, PValueKind::Lminus, PValueKind::Uminus] {
            let step = f.get(kind).unwrap();
            prop_assert_eq!(step.eval(theta), test.p_value(theta, kind).unwrap());
            for &b in step.breakpoints().iter().take(8) {
                prop_assert_eq!(step.eval(b), test.p_value(b, kind).unwrap());
            }
        }
    }

    #[test]
    fn one_sided_values_are_complementary((data, design) in dataset(), theta in -6.0f64..6.0) {
        let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact()).unwrap();
        let p = test.p_values(theta).unwrap();
        prop_assert!((p.lplus + p.uminus - 1.0).abs() < 1e-12);
        prop_assert!((p.lminus + p.uplus - 1.0).abs() < 1e-12);
        prop_assert!(p.uplus <= p.lplus && p.uminus <= p.lminus);
    }

    #[test]
    fn lplus_rises_and_lminus_falls((data, design) in dataset(), a in -6.0f64..6.0, d in 0.0f64..3.0) {
        let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact()).unwrap();
        prop_assert!(test.p_value(a, PValueKind::Lplus).unwrap() <= test.p_value(a + d, PValueKind::Lplus).unwrap());
        prop_assert!(test.p_value(a, PValueKind::Lminus).unwrap() >= test.p_value(a + d, PValueKind::Lminus).unwrap());
    }

    #[test]
    fn proposed_interval_contains_traditional((data, design) in dataset(), alpha in 0.05f64..0.6) {
        let test = RandomizationTest::new(&data, &design, &StatisticSpec::diff_means(), Mode::exact()).unwrap();
        let f = PValueFunctions::build(&test).unwrap();
        if let (Ok(p), Ok(t)) = (f.interval(alpha / 2.0, alpha / 2.0), f.traditional(alpha)) {
            prop_assert_eq!(p.lower, t.lower);
            prop_assert!(t.upper <= p.upper);
        }
    }

    #[test]
    fn combiners_are_monotone(p in prop::collection::vec(0.001f64..0.999, 2..5), i in 0usize..4, bump in 0.0f64..0.5) {
        let i = i % p.len();
        let mut q = p.clone();
        q[i] = (q[i] + bump).min(0.999);
        for spec in [CombinerSpec::fisher(), CombinerSpec::stouffer(), CombinerSpec::double_exponential()] {
            let lo = combine_values(&p, &spec).unwrap();
            let hi = combine_values(&q, &spec).unwrap();
            prop_assert!(lo <= hi + 1e-12, "{} {lo} > {hi}", spec.name());
            prop_assert!((0.0..=1.0).contains(&lo));
        }
    }

    #[test]
    fn required_k_is_minimal(epsilon in 0.01f64..0.5, delta in 0.001f64..0.5) {
        let k = required_k(epsilon, delta).unwrap();
        prop_assert!(error_bound(k, epsilon).unwrap() <= delta);
        if k > 1 {
            prop_assert!(error_bound(k - 1, epsilon).unwrap() > delta);
        }
    }
}
