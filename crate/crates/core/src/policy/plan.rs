//! Autoregressive plan generator over a closed vocabulary of step templates.

use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const END: &str = "<END>";
pub const MAX_PLAN_STEPS: usize = 20;
/// Positions at or beyond this share one position feature.
const MAX_POSITION_FEATURE: usize = 5;
const START: &str = "^";

/// Softmax over `vocab` (END first) with sparse weights. Active features for template `v`
/// at position `i` after template `prev`: `b|v`, `t|<task token>|v`, `p|<prev>|v`, `i|<i>|v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanHead {
    pub vocab: Vec<String>,
    pub weights: BTreeMap<String, f64>,
}

impl Default for PlanHead {
    fn default() -> Self {
        Self { vocab: vec![END.to_string()], weights: BTreeMap::new() }
    }
}

/// One decoding position: the keys active for each vocabulary entry.
pub struct PlanPosition {
    pub keys: Vec<Vec<String>>,
}

impl PlanHead {
    /// A head with END plus every distinct step of `plans`, sorted.
    pub fn with_vocab<'a>(plans: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut steps: Vec<String> = plans.into_iter().flatten().cloned().collect();
        steps.sort();
        steps.dedup();
        steps.retain(|s| s != END);
        let mut vocab = vec![END.to_string()];
        vocab.extend(steps);
        Self { vocab, weights: BTreeMap::new() }
    }

    pub fn index_of(&self, step: &str) -> Option<usize> {
        self.vocab.iter().position(|v| v == step)
    }

    pub fn task_tokens(task: &str) -> Vec<String> {
        text::token_set(&text::without_quotes(task)).into_iter().collect()
    }

    pub fn position(&self, tokens: &[String], prev: Option<usize>, i: usize) -> PlanPosition {
        let prev = prev.map_or(START, |p| self.vocab[p].as_str());
        let pos = i.min(MAX_POSITION_FEATURE);
        let keys = self
            .vocab
            .iter()
            .map(|v| {
                let mut k = Vec::with_capacity(tokens.len() + 3);
                k.push(format!("b|{v}"));
                k.extend(tokens.iter().map(|t| format!("t|{t}|{v}")));
                k.push(format!("p|{prev}|{v}"));
                k.push(format!("i|{pos}|{v}"));
                k
            })
            .collect();
        PlanPosition { keys }
    }

    pub fn scores(&self, pos: &PlanPosition) -> Vec<f64> {
        pos.keys.iter().map(|ks| ks.iter().map(|k| self.weights.get(k).copied().unwrap_or(0.0)).sum()).collect()
    }

    /// Greedy decoding. END is not allowed first, so any non-empty vocabulary yields at
    /// least one step.
    pub fn generate(&self, task: &str) -> Vec<String> {
        let tokens = Self::task_tokens(task);
        let mut out = Vec::new();
        let mut prev = None;
        for i in 0..MAX_PLAN_STEPS {
            let scores = self.scores(&self.position(&tokens, prev, i));
            let first = if i == 0 { 1 } else { 0 };
            let best = (first..scores.len()).fold(None::<usize>, |best, j| match best {
                Some(b) if scores[b] >= scores[j] => Some(b),
                _ => Some(j),
            });
            match best {
                Some(j) if j != 0 => {
                    out.push(self.vocab[j].clone());
                    prev = Some(j);
                }
                _ => break,
            }
        }
        out
    }

    /// Checks that every weight key names a vocabulary entry.
    pub fn validate(&self) -> Result<(), String> {
        if self.vocab.first().map(String::as_str) != Some(END) {
            return Err("plan vocabulary must start with the end token".into());
        }
        for key in self.weights.keys() {
            let kind = key.split('|').next().unwrap_or_default();
            let names_entry = self.vocab.iter().any(|v| key.ends_with(&format!("|{v}")));
            if !matches!(kind, "b" | "t" | "p" | "i") || !names_entry {
                return Err(format!("unknown plan feature `{key}`"));
            }
        }
        Ok(())
    }
}

pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_starts_with_end_and_is_sorted() {
        let plans = [vec!["b".to_string(), "a".to_string()], vec!["a".to_string()]];
        let head = PlanHead::with_vocab(plans.iter().map(|p| p.as_slice()));
        assert_eq!(head.vocab, [END, "a", "b"]);
    }

    #[test]
    fn end_dominant_head_still_emits_one_step() {
        let mut head = PlanHead::with_vocab([vec!["Do it".to_string()]].iter().map(|p| p.as_slice()));
        head.weights.insert(format!("b|{END}"), 50.0);
        assert_eq!(head.generate("anything"), ["Do it"]);
        assert!(PlanHead::default().generate("anything").is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut head = PlanHead::default();
        head.weights.insert("b|ghost".into(), 1.0);
        assert!(head.validate().is_err());
    }
}
