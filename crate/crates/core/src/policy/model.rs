use super::candidates::{enumerate, CandidateAction};
use super::features::{action_feature_names, featurize, status_features, StateContext, STATUS_FEATURES};
use super::plan::{log_softmax, PlanHead};
use super::state::AgentState;
use super::PolicyError;
use crate::env_sim::{ActionCall, Args, Status};
use crate::io;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "lam-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Gradient or update keyed like [`ModelParams::get`].
pub type Grad = BTreeMap<String, f64>;

/// Weights of the action head, the FINISH head and the plan head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub action: Vec<f64>,
    pub status: Vec<f64>,
    pub plan: PlanHead,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { action: vec![0.0; action_feature_names().len()], status: vec![0.0; STATUS_FEATURES.len()], plan: PlanHead::default() }
    }
}

fn action_index(name: &str) -> Option<usize> {
    action_feature_names().iter().position(|n| n == name)
}

fn status_index(name: &str) -> Option<usize> {
    STATUS_FEATURES.iter().position(|n| *n == name)
}

impl ModelParams {
    /// Weight by key: `action.<feature>`, `status.<feature>` or `plan.<plan key>`.
    pub fn get(&self, key: &str) -> f64 {
        if let Some(name) = key.strip_prefix("action.") {
            action_index(name).map_or(0.0, |i| self.action[i])
        } else if let Some(name) = key.strip_prefix("status.") {
            status_index(&format!("status.{name}")).map_or(0.0, |i| self.status[i])
        } else if let Some(k) = key.strip_prefix("plan.") {
            self.plan.weights.get(k).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Adds `delta` to the weight named by `key`; unknown keys are ignored.
    pub fn add(&mut self, key: &str, delta: f64) {
        if let Some(name) = key.strip_prefix("action.") {
            if let Some(i) = action_index(name) {
                self.action[i] += delta;
            }
        } else if let Some(name) = key.strip_prefix("status.") {
            if let Some(i) = status_index(&format!("status.{name}")) {
                self.status[i] += delta;
            }
        } else if let Some(k) = key.strip_prefix("plan.") {
            *self.plan.weights.entry(k.to_string()).or_insert(0.0) += delta;
        }
    }

    pub fn apply(&mut self, update: &Grad, scale: f64) {
        for (k, v) in update {
            self.add(k, scale * v);
        }
    }

    /// Every key with a stored weight.
    pub fn keys(&self) -> Vec<String> {
        let mut out: Vec<String> = action_feature_names().iter().map(|n| format!("action.{n}")).collect();
        out.extend(STATUS_FEATURES.iter().map(|n| format!("status.{}", &n["status.".len()..])));
        out.extend(self.plan.weights.keys().map(|k| format!("plan.{k}")));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.action.iter().chain(&self.status).chain(self.plan.weights.values()).all(|w| w.is_finite())
    }

    /// Copy with action and FINISH heads scaled; plan head untouched.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            action: self.action.iter().map(|w| w * c).collect(),
            status: self.status.iter().map(|w| w * c).collect(),
            plan: self.plan.clone(),
        }
    }

    pub fn generate_plan(&self, task: &str) -> Vec<String> {
        self.plan.generate(task)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            action: action_feature_names().iter().cloned().zip(self.action.iter().copied()).collect(),
            status: STATUS_FEATURES.iter().map(|s| s.to_string()).zip(self.status.iter().copied()).collect(),
            plan: self.plan.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, PolicyError> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(PolicyError::Version { format: ck.format, version: ck.version });
        }
        let mut p = ModelParams::default();
        fill(&mut p.action, &ck.action, action_index)?;
        fill(&mut p.status, &ck.status, status_index)?;
        ck.plan.validate().map_err(PolicyError::UnknownFeature)?;
        p.plan = ck.plan;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PolicyError::Format(e.to_string()))?;
        Self::from_checkpoint(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        Ok(io::write_atomic(path, self.to_json().as_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn fill(dst: &mut [f64], src: &BTreeMap<String, f64>, index: impl Fn(&str) -> Option<usize>) -> Result<(), PolicyError> {
    let mut seen = 0;
    for (name, w) in src {
        let i = index(name).ok_or_else(|| PolicyError::UnknownFeature(name.clone()))?;
        dst[i] = *w;
        seen += 1;
    }
    if seen != dst.len() {
        return Err(PolicyError::Format(format!("expected {} weights, found {seen}", dst.len())));
    }
    Ok(())
}

/// On-disk weights, keyed by feature name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub action: BTreeMap<String, f64>,
    pub status: BTreeMap<String, f64>,
    pub plan: PlanHead,
}

/// A state's candidates with their feature vectors. Independent of the weights, so
/// training computes it once per example.
#[derive(Debug, Clone)]
pub struct Featurized {
    /// Always ends with the pure FINISH.
    pub candidates: Vec<CandidateAction>,
    pub features: Vec<Vec<f64>>,
    pub status_features: Vec<[f64; 6]>,
}

impl Featurized {
    pub fn new(state: &AgentState) -> Self {
        let ctx = StateContext::new(state);
        let candidates = enumerate(state);
        let features = candidates.iter().map(|c| featurize(&ctx, c)).collect();
        let status_features = candidates.iter().map(|c| status_features(&ctx, c)).collect();
        Self { candidates, features, status_features }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn score(&self, params: &ModelParams) -> Scores {
        let scores: Vec<f64> = self.features.iter().map(|f| dot(&params.action, f)).collect();
        let log_probs = log_softmax(&scores);
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        let status_logits = self.status_features.iter().map(|s| dot(&params.status, s)).collect();
        Scores { scores, log_probs, probs, status_logits }
    }

    pub fn find(&self, control_label: &str, control_name: &str, function: &str, args: &Args) -> Option<usize> {
        self.candidates.iter().position(|c| c.matches(control_label, control_name, function, args))
    }

    /// Index of an action whose `control_text` holds the resolved control name.
    pub fn find_action(&self, action: &ActionCall) -> Option<usize> {
        self.find(&action.control_label, &action.control_text, &action.function, &action.args)
    }

    /// Gradient of `log_prob(i, status)` with respect to the action and FINISH weights.
    pub fn grad_log_prob(&self, sc: &Scores, i: usize, status: Status) -> (Vec<f64>, [f64; 6]) {
        let mut ga = self.features[i].clone();
        for (f, p) in self.features.iter().zip(&sc.probs) {
            if *p != 0.0 {
                ga.iter_mut().zip(f).for_each(|(g, x)| *g -= p * x);
            }
        }
        let mut gs = [0.0; 6];
        if !sc.is_finish(i) {
            let y = if status == Status::Finish { 1.0 } else { 0.0 };
            let r = y - sigmoid(sc.status_logits[i]);
            gs.iter_mut().zip(&self.status_features[i]).for_each(|(g, x)| *g = r * x);
        }
        (ga, gs)
    }
}

/// Softmax over candidate scores plus per-candidate FINISH logits. The last candidate is
/// the pure FINISH, whose status is implied.
#[derive(Debug, Clone)]
pub struct Scores {
    pub scores: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub probs: Vec<f64>,
    pub status_logits: Vec<f64>,
}

impl Scores {
    pub fn is_finish(&self, i: usize) -> bool {
        i + 1 == self.scores.len()
    }

    pub fn finish_prob(&self, i: usize) -> f64 {
        if self.is_finish(i) {
            1.0
        } else {
            sigmoid(self.status_logits[i])
        }
    }

    /// log P(candidate i, status).
    pub fn log_prob(&self, i: usize, status: Status) -> f64 {
        if self.is_finish(i) {
            return if status == Status::Finish { self.log_probs[i] } else { f64::NEG_INFINITY };
        }
        let z = self.status_logits[i];
        self.log_probs[i]
            + match status {
                Status::Finish => log_sigmoid(z),
                Status::Continue => log_sigmoid(-z),
            }
    }

    pub fn prob(&self, i: usize, status: Status) -> f64 {
        self.log_prob(i, status).exp()
    }
}

/// The policy's distribution over a state's candidates.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub featurized: Featurized,
    pub scores: Scores,
}

impl Distribution {
    pub fn candidates(&self) -> &[CandidateAction] {
        &self.featurized.candidates
    }

    pub fn probs(&self) -> &[f64] {
        &self.scores.probs
    }

    pub fn log_prob(&self, i: usize, status: Status) -> f64 {
        self.scores.log_prob(i, status)
    }

    pub fn prob(&self, i: usize, status: Status) -> f64 {
        self.scores.prob(i, status)
    }

    pub fn find_action(&self, action: &ActionCall) -> Option<usize> {
        self.featurized.find_action(action)
    }
}

pub fn action_distribution(state: &AgentState, params: &ModelParams) -> Distribution {
    let featurized = Featurized::new(state);
    let scores = featurized.score(params);
    Distribution { featurized, scores }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SelectMode {
    Argmax,
    /// Sampling from scores divided by `temperature`, seeded per step.
    Sample { seed: u64, temperature: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub candidate: CandidateAction,
    pub status: Status,
    pub prob: f64,
}

/// Argmax takes the highest-scoring candidate (the first on ties, which is the lowest
/// label, then registry order) and FINISH when its odds exceed one half.
pub fn select_from(dist: &Distribution, mode: SelectMode, step_id: usize) -> Choice {
    let sc = &dist.scores;
    let (index, status) = match mode {
        SelectMode::Argmax => {
            let i = (0..sc.scores.len()).fold(0, |b, j| if sc.scores[j] > sc.scores[b] { j } else { b });
            let finish = sc.is_finish(i) || sc.status_logits[i] > 0.0;
            (i, if finish { Status::Finish } else { Status::Continue })
        }
        SelectMode::Sample { seed, temperature } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(step_id as u64));
            let t = temperature.max(1e-6);
            let tempered = log_softmax(&sc.scores.iter().map(|s| s / t).collect::<Vec<_>>());
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut i = tempered.len() - 1;
            for (j, l) in tempered.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    i = j;
                    break;
                }
            }
            let finish = sc.is_finish(i) || rng.gen::<f64>() < sc.finish_prob(i);
            (i, if finish { Status::Finish } else { Status::Continue })
        }
    };
    Choice { index, candidate: dist.candidates()[index].clone(), status, prob: dist.prob(index, status) }
}

/// The chosen action, labelled with the plan step it carries out.
pub fn select_action(state: &AgentState, params: &ModelParams, mode: SelectMode, step: &str) -> ActionCall {
    let dist = action_distribution(state, params);
    let choice = select_from(&dist, mode, state.step_id);
    choice.candidate.to_action(step, choice.status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_sim::load_template;
    use crate::policy::features::n_action_features;

    fn state(task: &str) -> AgentState {
        AgentState::observe(&load_template("text_page").unwrap(), task, 1, &[], &[])
    }

    #[test]
    fn zero_weights_give_uniform() {
        let d = action_distribution(&state("Highlight the text 'Test For Fun'"), &ModelParams::default());
        let n = d.candidates().len() as f64;
        for p in d.probs() {
            assert!((p - 1.0 / n).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_shift_leaves_distribution() {
        let s = state("Highlight the text 'Test For Fun'");
        let mut p = ModelParams::default();
        p.action[3] = 1.3;
        p.action[13] = -0.4;
        let a = action_distribution(&s, &p);
        let shifted: Vec<f64> = a.scores.scores.iter().map(|x| x + 7.0).collect();
        let lp = log_softmax(&shifted);
        for (x, y) in a.scores.log_probs.iter().zip(lp) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_pick_lowest_label() {
        let s = state("Highlight the text 'Test For Fun'");
        let d = action_distribution(&s, &ModelParams::default());
        let c = select_from(&d, SelectMode::Argmax, 1);
        assert_eq!(c.index, 0);
        assert_eq!(c.candidate.control_label(), "1");
    }

    #[test]
    fn sampling_is_seeded() {
        let s = state("Highlight the text 'Test For Fun'");
        let p = ModelParams::default();
        let mode = SelectMode::Sample { seed: 7, temperature: 1.0 };
        assert_eq!(select_action(&s, &p, mode, "x"), select_action(&s, &p, mode, "x"));
    }

    #[test]
    fn checkpoint_roundtrip_and_strictness() {
        let mut p = ModelParams::default();
        p.action[0] = 0.1 + 0.2;
        p.status[2] = -1.0 / 3.0;
        p.plan = PlanHead::with_vocab([vec!["Open".to_string()]].iter().map(|v| v.as_slice()));
        p.plan.weights.insert("b|Open".into(), std::f64::consts::PI);
        let back = ModelParams::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let mut ck = p.to_checkpoint();
        ck.action.insert("mystery".into(), 1.0);
        assert!(matches!(ModelParams::from_checkpoint(ck), Err(PolicyError::UnknownFeature(_))));
        assert_eq!(p.action.len(), n_action_features());
    }

    #[test]
    fn key_access() {
        let mut p = ModelParams::default();
        p.add("action.op.pending", 2.0);
        p.add("status.remaining_zero", 1.0);
        p.add("plan.b|<END>", 0.5);
        assert_eq!(p.get("action.op.pending"), 2.0);
        assert_eq!(p.get("status.remaining_zero"), 1.0);
        assert_eq!(p.get("plan.b|<END>"), 0.5);
        assert!(p.keys().contains(&"status.bias".to_string()));
    }
}
