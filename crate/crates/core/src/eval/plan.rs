use super::{ratio, EvalError};
use crate::oracle::{Oracle, OracleRequest, PromptId};
use crate::text;
use serde::{Deserialize, Serialize};

/// Recall at or above this counts a plan as solving its task under the text matcher.
pub const RECALL_SUCCESS: f64 = 0.8;

pub enum Matcher<'a> {
    /// Greedy one-to-one matching on normalized text.
    Exact,
    /// Asks a judge to pair similar steps and decide whether the prediction solves the task.
    Oracle(&'a dyn Oracle),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPair {
    pub task: String,
    pub pred: Vec<String>,
    pub truth: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvalResult {
    pub tasks: usize,
    pub tsr: f64,
    pub step_precision: f64,
    pub step_recall: f64,
    /// `pred / truth` for every matched pair.
    pub matched_pairs: Vec<String>,
}

/// Index pairs (pred, truth); every truth step is used at most once.
pub fn exact_matches(pred: &[String], truth: &[String]) -> Vec<(usize, usize)> {
    let norm: Vec<String> = truth.iter().map(|t| text::normalize(t)).collect();
    let mut used = vec![false; truth.len()];
    let mut out = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        let p = text::normalize(p);
        if let Some(j) = (0..truth.len()).find(|&j| !used[j] && norm[j] == p) {
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

fn numbered(steps: &[String]) -> String {
    steps.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect::<Vec<_>>().join("\n")
}

/// Matched step texts and whether the judge says the prediction solves the task.
fn oracle_matches(oracle: &dyn Oracle, pair: &PlanPair) -> Result<(Vec<String>, bool), EvalError> {
    let req = OracleRequest::new(PromptId::PlanEval)
        .with("question", pair.task.clone())
        .with("answer1", numbered(&pair.pred))
        .with("answer2", numbered(&pair.truth));
    let reply = oracle.complete(&req)?;
    let malformed = |m: &str| EvalError::OracleFailure(crate::oracle::OracleError::MalformedResponse(m.into()));
    let similar = reply.parsed["Subtask3"]["Similar action items"].as_array().ok_or_else(|| malformed("similar items"))?;
    let pairs = similar.iter().map(|v| v.as_str().map(str::to_string)).collect::<Option<Vec<_>>>().ok_or_else(|| malformed("similar items"))?;
    let solves = match reply.parsed["Subtask1"].as_str() {
        Some("Yes") => true,
        Some("No") => false,
        _ => return Err(malformed("Subtask1")),
    };
    Ok((pairs, solves))
}

pub fn match_plan_steps(pred: &[String], truth: &[String], matcher: &Matcher) -> Result<Vec<String>, EvalError> {
    match matcher {
        Matcher::Exact => Ok(exact_matches(pred, truth).into_iter().map(|(i, j)| format!("{} / {}", pred[i], truth[j])).collect()),
        Matcher::Oracle(o) => {
            let pair = PlanPair { task: String::new(), pred: pred.to_vec(), truth: truth.to_vec() };
            Ok(oracle_matches(*o, &pair)?.0)
        }
    }
}

/// Micro-averaged precision and recall. A task counts as solved when the judge says so, or
/// under the text matcher when its recall reaches [`RECALL_SUCCESS`].
pub fn eval_plans(pairs: &[PlanPair], matcher: &Matcher) -> Result<PlanEvalResult, EvalError> {
    let (mut matched, mut n_pred, mut n_truth, mut solved) = (0, 0, 0, 0);
    let mut matched_pairs = Vec::new();
    for pair in pairs {
        let (m, ok) = match matcher {
            Matcher::Exact => {
                let m = match_plan_steps(&pair.pred, &pair.truth, matcher)?;
                let ok = !pair.truth.is_empty() && ratio(m.len(), pair.truth.len()) >= RECALL_SUCCESS;
                (m, ok)
            }
            Matcher::Oracle(o) => oracle_matches(*o, pair)?,
        };
        let count = m.len().min(pair.pred.len()).min(pair.truth.len());
        matched += count;
        n_pred += pair.pred.len();
        n_truth += pair.truth.len();
        solved += ok as usize;
        matched_pairs.extend(m);
    }
    Ok(PlanEvalResult {
        tasks: pairs.len(),
        tsr: ratio(solved, pairs.len()),
        step_precision: ratio(matched, n_pred),
        step_recall: ratio(matched, n_truth),
        matched_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::RuleOracle;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn pair(pred: &[&str], truth: &[&str]) -> PlanPair {
        PlanPair { task: "t".into(), pred: v(pred), truth: v(truth) }
    }

    #[test]
    fn partial_overlap() {
        let r = eval_plans(&[pair(&["A", "B"], &["A", "C", "D"])], &Matcher::Exact).unwrap();
        assert_eq!(r.matched_pairs, ["A / A"]);
        assert_eq!(r.step_precision, 0.5);
        assert_eq!(r.step_recall, 1.0 / 3.0);
        assert_eq!(r.tsr, 0.0);
    }

    #[test]
    fn identical_and_empty() {
        let r = eval_plans(&[pair(&["A", "B"], &["A", "B"])], &Matcher::Exact).unwrap();
        assert_eq!((r.tsr, r.step_precision, r.step_recall), (1.0, 1.0, 1.0));
        let e = eval_plans(&[pair(&[], &["A"])], &Matcher::Exact).unwrap();
        assert_eq!((e.step_precision, e.step_recall), (0.0, 0.0));
    }

    #[test]
    fn normalization_matches_case_and_punctuation() {
        let m = match_plan_steps(&v(&["go to DESIGN  > page borders."]), &v(&["Go to Design > Page Borders."]), &Matcher::Exact).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn each_truth_step_used_once() {
        assert_eq!(exact_matches(&v(&["A", "A"]), &v(&["A"])), [(0, 0)]);
    }

    #[test]
    fn oracle_matcher_agrees_with_text_matcher_on_mock() {
        let pairs = [pair(&["Select text", "Click Bold"], &["Select text", "Click Bold"]), pair(&["X"], &["Y", "Z"])];
        let a = eval_plans(&pairs, &Matcher::Exact).unwrap();
        let b = eval_plans(&pairs, &Matcher::Oracle(&RuleOracle)).unwrap();
        assert_eq!(a, b);
    }
}
