use std::collections::BTreeMap;

use dexsearch::harness::{average_progress, average_success, parse_config};
use dexsearch::learner::{action_to_command, command_to_action};
use dexsearch::planner::{pareto_rank_distribution, update_search_params, PlannerParams};
use dexsearch::sim::{make_env, TaskId};
use proptest::prelude::*;

proptest! {
    #[test]
    fn command_round_trip(a in prop::collection::vec(-1.0f64..=1.0, 1..5), lo in -2.0f64..0.0, width in 0.1f64..3.0) {
        let n = a.len();
        let (lo, hi) = (vec![lo; n], vec![lo + width; n]);
        let cmd = action_to_command(&a, &lo, &hi);
        prop_assert!(cmd.iter().zip(&lo).zip(&hi).all(|((c, l), h)| c >= l && c <= h));
        let back = command_to_action(&cmd, &lo, &hi);
        prop_assert!(back.iter().zip(&a).all(|(b, a)| (b - a).abs() < 1e-9));
    }

    #[test]
    fn rank_distribution_is_a_decreasing_pmf(n in 2usize..300, beta in 0.05f64..3.0) {
        let p = pareto_rank_distribution(n, beta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn search_params_stay_in_bounds(steps in prop::collection::vec((any::<bool>(), 1usize..12), 1..300)) {
        let env = make_env(TaskId::BoxPush2d, &BTreeMap::new()).unwrap();
        let p = PlannerParams::for_task(&env);
        let b = p.bounds();
        let (mut beta, mut n_e) = (b.beta_max, p.n_e_init);
        for (better, i_e) in steps {
            (beta, n_e) = update_search_params(beta, n_e, better, i_e, &b);
            prop_assert!(beta >= b.beta_min && beta <= b.beta_max);
            prop_assert!((1.0..=b.n_e_max).contains(&n_e));
        }
    }

    #[test]
    fn averages_lie_within_the_samples(xs in prop::collection::vec(0.0f64..=1.0, 1..40), extra in 0usize..20) {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let a = average_progress(&xs);
        let s = average_success(&xs, xs.len() + extra);
        prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
        prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
    }

    #[test]
    fn config_snapshot_round_trips(gamma in 0.5f64..0.999, n_e_max in 2.0f64..20.0, b_p in 0.0f64..=1.0, seeds in prop::collection::vec(0u64..1000, 1..6)) {
        let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let text = format!(
            "task = \"box_push_2d\"\nseeds = [{}]\nlearner.gamma = {gamma:?}\nplanner.n_e_max = {n_e_max:?}\nlearner.b_p = {b_p:?}\n",
            seeds.join(", ")
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.learner.gamma, gamma);
        let again = parse_config(&cfg.to_toml()).unwrap();
        prop_assert_eq!(again.to_toml(), cfg.to_toml());
    }
}
