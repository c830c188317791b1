mod common;

use common::*;
use lam_core::eval::{eval_actions, eval_plans, match_plan_steps, Matcher};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn action_metrics_equal_brute_force(seed in any::<u64>()) {
        let (pred, truth) = random_action_suite(seed);
        let r = eval_actions(&pred, &truth).unwrap();
        let b = brute_action_metrics(&pred, &truth);
        prop_assert_eq!([r.object_acc, r.operation_acc, r.status_acc, r.ssr, r.tsr], b);
        for x in b {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        if r.ssr == 1.0 {
            prop_assert_eq!((r.object_acc, r.operation_acc, r.status_acc), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn plan_metrics_equal_brute_force(seed in any::<u64>()) {
        let pairs = random_plan_pairs(seed);
        let r = eval_plans(&pairs, &Matcher::Exact).unwrap();
        prop_assert_eq!([r.tsr, r.step_precision, r.step_recall], brute_plan_metrics(&pairs));
    }

    #[test]
    fn a_plan_matches_itself_completely(steps in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,3}", 0..8)) {
        let m = match_plan_steps(&steps, &steps, &Matcher::Exact).unwrap();
        prop_assert_eq!(m.len(), steps.len());
    }
}

#[test]
fn unknown_prediction_ids_are_rejected() {
    let (mut pred, truth) = random_action_suite(3);
    pred.push(lam_core::eval::TaskActions { task_id: "ghost".into(), steps: vec![] });
    assert!(eval_actions(&pred, &truth).is_err());
}
