mod common;

use common::{random_params, random_state};
use lam_core::env_sim::Status;
use lam_core::policy::{action_distribution, select_from, SelectMode};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn distributions_are_valid(seed in any::<u64>(), scale in 0.0f64..3.0) {
        let state = random_state(seed);
        let dist = action_distribution(&state, &random_params(seed ^ 1, scale));
        let probs = dist.probs();
        prop_assert!(probs.iter().all(|p| *p >= 0.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(dist.candidates().last().unwrap().is_finish());
        // Candidate and status jointly also sum to one.
        let joint: f64 = (0..probs.len())
            .map(|i| dist.prob(i, Status::Finish) + if i + 1 < probs.len() { dist.prob(i, Status::Continue) } else { 0.0 })
            .sum();
        prop_assert!((joint - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_probs_match_probabilities(seed in any::<u64>()) {
        let dist = action_distribution(&random_state(seed), &random_params(seed ^ 2, 1.0));
        for i in 0..dist.probs().len() {
            prop_assert!((dist.scores.log_probs[i].exp() - dist.probs()[i]).abs() <= 1e-12);
            for st in [Status::Finish, Status::Continue] {
                prop_assert!((dist.log_prob(i, st).exp() - dist.prob(i, st)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn argmax_ignores_positive_scaling(seed in any::<u64>(), power in -3i32..4) {
        let state = random_state(seed);
        let params = random_params(seed ^ 3, 1.0);
        // Powers of two scale every score exactly.
        let c = 2f64.powi(power);
        let a = select_from(&action_distribution(&state, &params), SelectMode::Argmax, state.step_id);
        let b = select_from(&action_distribution(&state, &params.scaled(c)), SelectMode::Argmax, state.step_id);
        prop_assert_eq!(a.index, b.index);
        prop_assert_eq!(a.status, b.status);
    }

    #[test]
    fn sampling_is_seed_deterministic(seed in any::<u64>()) {
        let state = random_state(seed);
        let dist = action_distribution(&state, &random_params(seed ^ 4, 1.0));
        let mode = SelectMode::Sample { seed, temperature: 1.0 };
        let a = select_from(&dist, mode, state.step_id);
        let b = select_from(&dist, mode, state.step_id);
        prop_assert_eq!(a.index, b.index);
        prop_assert!(a.index < dist.probs().len());
    }
}
