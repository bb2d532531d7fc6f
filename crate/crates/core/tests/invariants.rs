use proptest::prelude::*;

use logtree::exact::{central_moment_dp, expected_node_counts, expected_profile_dp};
use logtree::generate::{generate_depths, grow_checkpoints, profile_from_depths, GrowthSchedule};
use logtree::model::width_and_mode;
use logtree::parse_model_spec;
use logtree::scalar::Rational;

fn two_way() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["recursive", "port", "quad:d=1", "mary:m=2,t=0", "mary:m=2,t=1"])
}

fn any_family() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec![
        "recursive",
        "port",
        "quad:d=2",
        "grid:m=3,d=2",
        "mary:m=3,t=1",
        "increasing:phi=1,2,1",
        "mobile",
    ])
}

fn single_insertion() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["recursive", "port", "quad:d=1", "quad:d=3"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moment_tables_are_consistent(spec in two_way(), n_max in 2usize..16) {
        let model = parse_model_spec(spec).unwrap();
        let t = central_moment_dp::<Rational>(&model, n_max, n_max, 4).unwrap();
        let counts = expected_node_counts::<Rational>(&model, n_max).unwrap();
        for n in 1..=n_max {
            let total: Rational = t.mu[n].iter().sum();
            prop_assert_eq!(&total, &counts[n]);
            for k in 0..=n_max {
                prop_assert!(t.moment(1, n, k) == Rational::from_integer(0.into()));
                prop_assert!(t.moment(2, n, k) >= Rational::from_integer(0.into()));
                prop_assert!(t.moment(4, n, k) >= Rational::from_integer(0.into()));
            }
        }
    }

    #[test]
    fn float_profiles_track_rational_ones(spec in two_way(), n in 2usize..60) {
        let model = parse_model_spec(spec).unwrap();
        let exact = expected_profile_dp::<Rational>(&model, n, n).unwrap();
        let float = expected_profile_dp::<f64>(&model, n, n).unwrap();
        for k in 0..=n {
            let e = logtree::scalar::ratio_to_f64(&exact.mu[n][k]);
            prop_assert!((e - float.mu[n][k]).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn generation_is_deterministic(spec in any_family(), n in 1u64..300, seed in any::<u64>()) {
        let model = parse_model_spec(spec).unwrap();
        let a = generate_depths(&model, n, seed).unwrap();
        let b = generate_depths(&model, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let profile = profile_from_depths(&a);
        let w = width_and_mode(&profile).unwrap();
        prop_assert_eq!(profile.counts[w.mode_level], w.width);
    }

    #[test]
    fn width_moves_by_at_most_one_per_insertion(spec in single_insertion(), seed in any::<u64>()) {
        let model = parse_model_spec(spec).unwrap();
        let schedule = GrowthSchedule::new((1..=400).collect()).unwrap();
        let path = grow_checkpoints(&model, &schedule, seed).unwrap();
        prop_assert!(path.max_width_step <= 1);
        for w in path.points.windows(2) {
            prop_assert!(w[1].width.abs_diff(w[0].width) <= 1);
        }
    }
}
