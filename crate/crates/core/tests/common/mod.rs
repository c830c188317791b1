//! Seeded generators, brute-force metric references and finite-difference helpers shared by
//! the property tests and the acceptance suite.
#![allow(dead_code)]

use lam_core::dataflow::{Source, TaskPlanRecord, TrainingRecord};
use lam_core::env_sim::Status;
use lam_core::eval::actions::{GroundTruthStep, PredictedStep, TaskActions};
use lam_core::eval::plan::PlanPair;
use lam_core::oracle::RuleOracle;
use lam_core::policy::{Grad, ModelParams, PlanHead};
use lam_core::suite::build_corpus;
use lam_core::training::losses::group_trajectories;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::OnceLock;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const OBJECTS: [&str; 5] = ["Bold", "Italic", "Insert", "Font Size", "Shapes"];
const OPERATIONS: [&str; 4] = ["click_input", "select_text", "set_edit_text", "toggle_bold"];
const STEP_WORDS: [&str; 6] = ["open menu", "choose size", "apply bold", "insert chart", "close pane", "add border"];

fn status(r: &mut ChaCha8Rng) -> Status {
    if r.gen_bool(0.3) {
        Status::Finish
    } else {
        Status::Continue
    }
}

/// A random (prediction, ground truth) pair of action suites. Some truth tasks have no
/// prediction and predicted lengths differ from the truth.
pub fn random_action_suite(seed: u64) -> (Vec<TaskActions<PredictedStep>>, Vec<TaskActions<GroundTruthStep>>) {
    let mut r = rng(seed);
    let n_tasks = r.gen_range(1..=6);
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for t in 0..n_tasks {
        let id = format!("t{t}");
        let len = r.gen_range(0..=5);
        let steps: Vec<GroundTruthStep> = (0..len)
            .map(|_| {
                let k = r.gen_range(0..=2);
                GroundTruthStep {
                    acceptable_objects: (0..k).map(|_| OBJECTS.choose(&mut r).unwrap().to_string()).collect(),
                    operation: OPERATIONS.choose(&mut r).unwrap().to_string(),
                    status: status(&mut r),
                }
            })
            .collect();
        if r.gen_bool(0.85) {
            let plen = (len as i64 + r.gen_range(-1..=1)).max(0) as usize;
            let psteps = (0..plen)
                .map(|i| {
                    // Mostly copy the truth so that successes occur.
                    if let (Some(g), true) = (steps.get(i), r.gen_bool(0.7)) {
                        PredictedStep {
                            control_name: g.acceptable_objects.iter().next().cloned().unwrap_or_default(),
                            function: if r.gen_bool(0.9) { g.operation.clone() } else { "scroll".into() },
                            status: if r.gen_bool(0.9) { g.status } else { status(&mut r) },
                        }
                    } else {
                        PredictedStep {
                            control_name: if r.gen_bool(0.2) { String::new() } else { OBJECTS.choose(&mut r).unwrap().to_string() },
                            function: OPERATIONS.choose(&mut r).unwrap().to_string(),
                            status: status(&mut r),
                        }
                    }
                })
                .collect();
            pred.push(TaskActions { task_id: id.clone(), steps: psteps });
        }
        truth.push(TaskActions { task_id: id, steps });
    }
    pred.shuffle(&mut r);
    (pred, truth)
}

/// Object, operation, status, step success and task success rates, recomputed literally.
pub fn brute_action_metrics(
    pred: &[TaskActions<PredictedStep>],
    truth: &[TaskActions<GroundTruthStep>],
) -> [f64; 5] {
    let mut counts = [0usize; 4];
    let mut total = 0usize;
    let mut tasks_ok = 0usize;
    for t in truth {
        let p: Vec<PredictedStep> = pred.iter().filter(|p| p.task_id == t.task_id).flat_map(|p| p.steps.clone()).collect();
        let mut all = p.len() == t.steps.len();
        for (i, g) in t.steps.iter().enumerate() {
            total += 1;
            let (o, f, s) = match p.get(i) {
                None => (false, false, false),
                Some(s) => (
                    if g.acceptable_objects.is_empty() { s.control_name.is_empty() } else { g.acceptable_objects.contains(&s.control_name) },
                    s.function == g.operation,
                    s.status == g.status,
                ),
            };
            counts[0] += o as usize;
            counts[1] += f as usize;
            counts[2] += s as usize;
            counts[3] += (o && f && s) as usize;
            all &= o && f && s;
        }
        tasks_ok += all as usize;
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    [frac(counts[0], total), frac(counts[1], total), frac(counts[2], total), frac(counts[3], total), frac(tasks_ok, truth.len())]
}

pub fn random_plan_pairs(seed: u64) -> Vec<PlanPair> {
    let mut r = rng(seed);
    (0..r.gen_range(1..=6))
        .map(|i| {
            let mut pick = |n: usize| (0..n).map(|_| STEP_WORDS.choose(&mut r).unwrap().to_string()).collect::<Vec<_>>();
            let truth = pick(4.min(1 + i % 4));
            let mut pred = pick(i % 4);
            pred.extend(truth.iter().filter(|_| i % 2 == 0).cloned());
            PlanPair { task: format!("task {i}"), pred, truth }
        })
        .collect()
}

/// TSR, step precision and step recall under one-to-one exact matching with a recall
/// threshold of 0.8 for task success.
pub fn brute_plan_metrics(pairs: &[PlanPair]) -> [f64; 3] {
    let (mut matched, mut np, mut nt, mut ok) = (0usize, 0usize, 0usize, 0usize);
    for p in pairs {
        // Multiset intersection size equals greedy one-to-one matching on equal strings.
        let mut pool = p.truth.clone();
        let mut m = 0;
        for s in &p.pred {
            if let Some(j) = pool.iter().position(|t| t == s) {
                pool.remove(j);
                m += 1;
            }
        }
        matched += m;
        np += p.pred.len();
        nt += p.truth.len();
        ok += (!p.truth.is_empty() && m as f64 / p.truth.len() as f64 >= 0.8) as usize;
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    [frac(ok, pairs.len()), frac(matched, np), frac(matched, nt)]
}

/// Central difference of `f` at `key` with step `h`.
pub fn central_difference(params: &ModelParams, key: &str, h: f64, f: impl Fn(&ModelParams) -> f64) -> f64 {
    let mut plus = params.clone();
    plus.add(key, h);
    let mut minus = params.clone();
    minus.add(key, -h);
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Largest relative error between analytic and numeric gradients, with magnitudes below
/// `floor` compared absolutely.
pub fn max_relative_error(pairs: &[(f64, f64)], floor: f64) -> f64 {
    pairs.iter().map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor)).fold(0.0, f64::max)
}

pub fn normal(r: &mut ChaCha8Rng, scale: f64) -> f64 {
    // Sum of uniforms; shape is not important here.
    (0..4).map(|_| r.gen_range(-1.0..1.0)).sum::<f64>() * scale
}

/// A random batch of plans over a six-step vocabulary and a head with random weights on
/// every feature the batch touches.
pub fn random_plan_batch(seed: u64) -> (ModelParams, Vec<TaskPlanRecord>) {
    let mut r = rng(seed);
    let words = ["page", "text", "bold", "chart", "color", "table", "size"];
    let batch: Vec<TaskPlanRecord> = (0..r.gen_range(1..=4))
        .map(|i| TaskPlanRecord {
            task_id: format!("p{i}"),
            task: (0..3).map(|_| *words.choose(&mut r).unwrap()).collect::<Vec<_>>().join(" "),
            plan: (0..r.gen_range(1..=3)).map(|_| STEP_WORDS.choose(&mut r).unwrap().to_string()).collect(),
            source: Source::Doc,
        })
        .collect();
    // The vocabulary covers every step even when the batch uses few of them.
    let all: Vec<String> = STEP_WORDS.iter().map(|s| s.to_string()).collect();
    let mut params = ModelParams { plan: PlanHead::with_vocab([all.as_slice()]), ..ModelParams::default() };
    let keys: BTreeSet<String> = lam_core::training::losses::sft_plan_loss(&params, &batch).unwrap().grad.into_keys().collect();
    for k in keys {
        let w = normal(&mut r, 0.5);
        params.add(&k, w);
    }
    (params, batch)
}

pub fn suite_trajectories() -> &'static [Vec<TrainingRecord>] {
    static T: OnceLock<Vec<Vec<TrainingRecord>>> = OnceLock::new();
    T.get_or_init(|| group_trajectories(&build_corpus(&RuleOracle).expect("suite corpus").training))
}

/// A few suite demonstrations and random action and FINISH weights.
pub fn random_imitation_batch(seed: u64) -> (ModelParams, Vec<Vec<TrainingRecord>>) {
    let mut r = rng(seed);
    let all = suite_trajectories();
    let k = r.gen_range(1..=3);
    let batch: Vec<Vec<TrainingRecord>> = all.choose_multiple(&mut r, k).cloned().collect();
    let mut params = ModelParams::default();
    params.action.iter_mut().for_each(|w| *w = normal(&mut r, 0.3));
    params.status.iter_mut().for_each(|w| *w = normal(&mut r, 0.3));
    (params, batch)
}

pub fn random_rm_batch(seed: u64) -> (Vec<f64>, Vec<(Vec<f64>, f64)>) {
    let mut r = rng(seed);
    let dim = lam_core::training::reward::rm_feature_names().len();
    let weights = (0..dim).map(|_| normal(&mut r, 0.3)).collect();
    let rows = (0..r.gen_range(1..=8))
        .map(|_| {
            let x = (0..dim).map(|_| if r.gen_bool(0.4) { r.gen_range(0.0..1.0) } else { 0.0 }).collect();
            (x, if r.gen_bool(0.5) { 1.0 } else { -1.0 })
        })
        .collect();
    (weights, rows)
}

pub fn grad_keys(g: &Grad) -> Vec<String> {
    g.keys().cloned().collect()
}

/// A state reached by a few random candidate actions from a random template, with a task
/// from the bundled suite.
pub fn random_state(seed: u64) -> lam_core::policy::AgentState {
    use lam_core::dataflow::HistoryEntry;
    use lam_core::env_sim::{load_template, template_ids, ActionResult};
    use lam_core::policy::{enumerate, AgentState};
    let mut r = rng(seed);
    let tasks = lam_core::suite::suite_tasks();
    let task = tasks.choose(&mut r).unwrap().task.clone();
    let template = *template_ids().choose(&mut r).unwrap();
    let mut snap = load_template(template).unwrap();
    let mut history = Vec::new();
    for step in 1..=r.gen_range(0..=3) {
        let state = AgentState::observe(&snap, &task, step, &history, &[]);
        let cands = enumerate(&state);
        let c = &cands[r.gen_range(0..cands.len() - 1)];
        let action = c.to_action("random step", Status::Continue);
        let result = match snap.apply_action(&action) {
            Ok((next, res)) => {
                snap = next;
                res
            }
            Err(e) => ActionResult::failure(&e),
        };
        history.push(HistoryEntry {
            step,
            control_label: c.control_label().to_string(),
            control_name: c.control_text().to_string(),
            function: c.function.clone(),
            args: c.args.clone(),
            status: Status::Continue,
            result,
        });
    }
    let plan: Vec<String> = (0..r.gen_range(0..=3)).map(|_| STEP_WORDS.choose(&mut r).unwrap().to_string()).collect();
    AgentState::observe(&snap, &task, history.len() + 1, &history, &plan)
}

pub fn random_params(seed: u64, scale: f64) -> ModelParams {
    let mut r = rng(seed);
    let mut p = ModelParams::default();
    p.action.iter_mut().for_each(|w| *w = normal(&mut r, scale));
    p.status.iter_mut().for_each(|w| *w = normal(&mut r, scale));
    p
}
