mod common;

use common::*;
use lam_core::policy::{ModelParams, PlanHead};
use lam_core::dataflow::{Source, TaskPlanRecord};
use lam_core::training::losses::{imitation_loss, record_step, sft_plan_loss, StepWeighting};
use lam_core::training::ppo::{clipped_term, compute_advantage, ppo_objective, prepare_ppo};
use lam_core::training::reward::rm_mse;
use lam_core::training::{adapt_kl_coef, PpoConfig};
use proptest::prelude::*;
use rand::Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
/// Below this magnitude gradients are compared absolutely.
const FLOOR: f64 = 1e-6;

fn check_plan_gradient(seed: u64) -> f64 {
    let (params, batch) = random_plan_batch(seed);
    let lg = sft_plan_loss(&params, &batch).unwrap();
    let f = |p: &ModelParams| sft_plan_loss(p, &batch).unwrap().loss;
    let mut pairs: Vec<(f64, f64)> = lg.grad.iter().map(|(k, g)| (*g, central_difference(&params, k, H, f))).collect();
    // A feature the batch never activates has zero gradient.
    pairs.push((0.0, central_difference(&params, "plan.b|unused step", H, f)));
    max_relative_error(&pairs, FLOOR)
}

fn check_imitation_gradient(seed: u64) -> f64 {
    let (params, batch) = random_imitation_batch(seed);
    let f = |p: &ModelParams| imitation_loss(p, &batch, StepWeighting::TrajectoryMean).unwrap().loss;
    let lg = imitation_loss(&params, &batch, StepWeighting::TrajectoryMean).unwrap();
    let pairs: Vec<(f64, f64)> = lg.grad.iter().map(|(k, g)| (*g, central_difference(&params, k, H, f))).collect();
    max_relative_error(&pairs, FLOOR)
}

fn check_rm_gradient(seed: u64) -> f64 {
    let (w, rows) = random_rm_batch(seed);
    let (_, grad) = rm_mse(&w, &rows);
    let pairs: Vec<(f64, f64)> = (0..w.len())
        .map(|i| {
            let mut plus = w.clone();
            plus[i] += H;
            let mut minus = w.clone();
            minus[i] -= H;
            (grad[i], (rm_mse(&plus, &rows).0 - rm_mse(&minus, &rows).0) / (2.0 * H))
        })
        .collect();
    max_relative_error(&pairs, FLOOR)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn plan_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = check_plan_gradient(seed);
        prop_assert!(e <= REL_TOL, "relative error {e}");
    }

    #[test]
    fn imitation_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = check_imitation_gradient(seed);
        prop_assert!(e <= REL_TOL, "relative error {e}");
    }

    #[test]
    fn reward_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = check_rm_gradient(seed);
        prop_assert!(e <= REL_TOL, "relative error {e}");
    }

    #[test]
    fn ppo_objective_gradient_matches_finite_differences(seed in any::<u64>(), beta in 0.0f64..2.0) {
        let (old, batch) = random_imitation_batch(seed);
        let steps: Vec<_> = batch.iter().flatten().map(record_step).collect();
        let prepared = prepare_ppo(&old, &steps).unwrap();
        let adv: Vec<f64> = (0..prepared.len()).map(|i| if i % 2 == 0 { 0.3 } else { -0.2 }).collect();
        let delta = random_params(seed ^ 9, 0.05);
        let mut theta = old.clone();
        theta.action.iter_mut().zip(&delta.action).for_each(|(w, d)| *w += d);
        theta.status.iter_mut().zip(&delta.status).for_each(|(w, d)| *w += d);
        // A large clip range keeps every term on the differentiable branch.
        let eps = 10.0;
        let eval = ppo_objective(&theta, &prepared, &adv, eps, beta);
        let f = |p: &ModelParams| ppo_objective(p, &prepared, &adv, eps, beta).objective;
        let pairs: Vec<(f64, f64)> = eval.grad.iter().map(|(k, g)| (*g, central_difference(&theta, k, H, f))).collect();
        let e = max_relative_error(&pairs, FLOOR);
        prop_assert!(e <= REL_TOL, "relative error {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clipped_terms_stay_within_bounds(ratio in 0.0f64..3.0, adv in -2.0f64..2.0, eps in 0.01f64..0.5) {
        let t = clipped_term(ratio, adv, eps);
        let cands = [ratio * adv, (1.0 - eps) * adv, (1.0 + eps) * adv];
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= t && t <= hi);
        if (1.0 - eps..=1.0 + eps).contains(&ratio) {
            prop_assert_eq!(t, ratio * adv);
        }
    }

    #[test]
    fn advantages_are_centered(rewards in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let adv = compute_advantage(&rewards, &PpoConfig::default());
        prop_assert!(adv.iter().sum::<f64>().abs() <= 1e-12);
        let spread = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
        let (lo, hi) = PpoConfig::default().reward_range;
        prop_assert!((spread(&adv) - (hi - lo) * spread(&rewards)).abs() <= 1e-12);
    }

    #[test]
    fn kl_coefficient_moves_toward_target(beta in 0.01f64..10.0, kl in 0.0f64..1.0, target in 0.001f64..0.5) {
        let next = adapt_kl_coef(beta, kl, target);
        if kl > 1.5 * target {
            prop_assert_eq!(next, 2.0 * beta);
        } else if kl < target / 1.5 {
            prop_assert_eq!(next, beta / 2.0);
        } else {
            prop_assert_eq!(next, beta);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unchanged_policy_surrogate_is_mean_advantage(seed in any::<u64>(), eps in 0.05f64..0.5) {
        let (params, batch) = random_imitation_batch(seed);
        let steps: Vec<_> = batch.iter().flatten().map(record_step).collect();
        let prepared = prepare_ppo(&params, &steps).unwrap();
        let mut r = rng(seed);
        let adv: Vec<f64> = (0..prepared.len()).map(|_| normal(&mut r, 0.5)).collect();
        let eval = ppo_objective(&params, &prepared, &adv, eps, 0.3);
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        prop_assert!((eval.surrogate - mean).abs() <= 1e-12);
        prop_assert!(eval.kl.abs() <= 1e-12);
    }
}

fn descend(mut params: ModelParams, loss: impl Fn(&ModelParams) -> (f64, lam_core::policy::Grad)) -> Vec<f64> {
    let mut out = Vec::new();
    for _ in 0..=50 {
        let (l, g) = loss(&params);
        out.push(l);
        params.apply(&g, -1e-2);
    }
    out
}

fn strictly_descending(losses: &[f64]) -> bool {
    losses.windows(2).all(|w| w[1] <= w[0] + 1e-12) && losses[50] < losses[0]
}

#[test]
fn plan_loss_descends_on_eight_examples() {
    for seed in 0..5u64 {
        let (_, mut batch) = random_plan_batch(seed);
        let mut r = rng(seed);
        while batch.len() < 8 {
            let (_, more) = random_plan_batch(r.gen::<u64>());
            batch.extend(more);
        }
        batch.truncate(8);
        let vocab: Vec<String> = batch.iter().flat_map(|b| b.plan.clone()).collect();
        let params = ModelParams { plan: PlanHead::with_vocab([vocab.as_slice()]), ..ModelParams::default() };
        let losses = descend(params, |p| {
            let lg = sft_plan_loss(p, &batch).unwrap();
            (lg.loss, lg.grad)
        });
        assert!(strictly_descending(&losses), "{losses:?}");
    }
}

#[test]
fn imitation_loss_descends_on_eight_steps() {
    let trajs = suite_trajectories();
    let mut batch = Vec::new();
    let mut n = 0;
    for t in trajs {
        if n + t.len() <= 8 {
            n += t.len();
            batch.push(t.clone());
        }
    }
    assert_eq!(n, 8);
    let losses = descend(ModelParams::default(), |p| {
        let lg = imitation_loss(p, &batch, StepWeighting::TrajectoryMean).unwrap();
        (lg.loss, lg.grad)
    });
    assert!(strictly_descending(&losses), "{losses:?}");
}

#[test]
fn empty_plan_batches_are_rejected() {
    assert!(sft_plan_loss(&ModelParams::default(), &[]).is_err());
    let rec = TaskPlanRecord { task_id: "x".into(), task: "t".into(), plan: vec!["never seen".into()], source: Source::Doc };
    assert!(sft_plan_loss(&ModelParams::default(), &[rec]).is_err());
}
