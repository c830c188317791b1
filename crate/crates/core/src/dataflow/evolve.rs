use super::records::{Source, TaskPlanRecord};
use super::DataflowError;
use crate::oracle::{str_field, Oracle, OracleError, OracleRequest, PromptId};
use crate::text;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub max_extra_words: usize,
    /// Evolved records to produce, as a multiple of the input count.
    pub target_multiplier: f64,
    /// Further tries after a reply fails validation.
    pub max_retries: u32,
    /// Passes over the input before giving up on reaching the target.
    pub max_rounds: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { max_extra_words: 20, target_multiplier: 1.5, max_retries: 2, max_rounds: 8 }
    }
}

/// Checks an evolved task against its original.
pub fn validate_evolution(original: &str, evolved: &str, plan: &[String], cfg: &EvolutionConfig) -> Result<(), String> {
    if evolved.trim().is_empty() {
        return Err("evolved task is empty".into());
    }
    let extra = text::word_count(evolved) as i64 - text::word_count(original) as i64;
    if extra > cfg.max_extra_words as i64 {
        return Err(format!("adds {extra} words, limit is {}", cfg.max_extra_words));
    }
    if text::token_set(original).is_disjoint(&text::token_set(evolved)) {
        return Err("shares no keyword with the original task".into());
    }
    if plan.is_empty() || plan.iter().any(|s| s.trim().is_empty()) {
        return Err("evolved plan is empty".into());
    }
    Ok(())
}

/// Asks the oracle for a harder version of `record`. A reply that fails validation is
/// retried at most `max_retries` times, then the record is rejected.
pub fn evolve_task(
    record: &TaskPlanRecord,
    oracle: &dyn Oracle,
    cfg: &EvolutionConfig,
    variant: usize,
) -> Result<TaskPlanRecord, DataflowError> {
    let mut last = String::new();
    for attempt in 0..=cfg.max_retries {
        let request = OracleRequest::new(PromptId::Evolve)
            .with("task", record.task.clone())
            .with("plan", serde_json::to_string(&record.plan).expect("plan serializes"))
            .with("variant", variant.to_string())
            .with("max_extra_words", cfg.max_extra_words.to_string());
        let reply = oracle.complete(&request)?;
        let task = str_field(&reply.parsed, "task")?.trim().to_string();
        let plan: Vec<String> = serde_json::from_value(reply.parsed["plan"].clone())
            .map_err(|e| OracleError::MalformedResponse(format!("plan: {e}")))?;
        match validate_evolution(&record.task, &task, &plan, cfg) {
            Ok(()) => {
                return Ok(TaskPlanRecord {
                    task_id: format!("{}_evo{variant}", record.task_id),
                    task,
                    plan,
                    source: Source::Evolved,
                })
            }
            Err(why) => {
                tracing::debug!(task_id = %record.task_id, attempt, %why, "evolution rejected");
                last = why;
            }
        }
    }
    Err(DataflowError::Validation(format!("{}: {last}", record.task_id)))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolveStats {
    pub target: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Evolves records in rounds (variant = round number) until `ceil(multiplier * n)` evolved
/// records exist. Returns the originals followed by the evolved records, sorted by id.
pub fn evolve_corpus(
    records: &[TaskPlanRecord],
    oracle: &dyn Oracle,
    cfg: &EvolutionConfig,
) -> (Vec<TaskPlanRecord>, EvolveStats) {
    let target = (cfg.target_multiplier * records.len() as f64).ceil() as usize;
    let mut stats = EvolveStats { target, ..Default::default() };
    let mut evolved = Vec::new();
    for round in 0..cfg.max_rounds {
        if evolved.len() >= target {
            break;
        }
        let results: Vec<_> = records.par_iter().map(|r| evolve_task(r, oracle, cfg, round)).collect();
        for result in results {
            if evolved.len() >= target {
                break;
            }
            match result {
                Ok(rec) => evolved.push(rec),
                Err(e) => {
                    tracing::debug!(%e, "evolution failed");
                    stats.rejected += 1;
                }
            }
        }
    }
    stats.accepted = evolved.len();
    let mut all: Vec<TaskPlanRecord> = records.iter().cloned().chain(evolved).collect();
    all.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    (all, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{RuleOracle, ScriptedOracle};

    fn rec(id: &str, task: &str) -> TaskPlanRecord {
        TaskPlanRecord { task_id: id.into(), task: task.into(), plan: vec!["step".into()], source: Source::Doc }
    }

    #[test]
    fn excel_drop_down_example_passes_validators() {
        let evolved = "Create a dependent drop-down list in Excel for Office 365, where selecting an item from the first list filters options in the second list";
        let reply = serde_json::json!({
            "task": evolved,
            "plan": [
                "Prepare your data by organizing it into two columns.",
                "Create the primary drop-down list using Data Validation.",
                "Use the INDIRECT function to create the dependent drop-down list linked to the first selection."
            ]
        });
        let oracle = ScriptedOracle::new().reply(PromptId::Evolve, "drop-down", &reply.to_string());
        let r = rec("excel_001", "Create a drop-down list in Excel for Office 365");
        let out = evolve_task(&r, &oracle, &EvolutionConfig::default(), 0).unwrap();
        assert_eq!(out.task, evolved);
        assert_eq!(out.source, Source::Evolved);
    }

    #[test]
    fn forty_extra_words_fail() {
        let long = format!("Insert a chart {}", vec!["quickly"; 40].join(" "));
        let reply = serde_json::json!({"task": long, "plan": ["a"]}).to_string();
        let oracle = ScriptedOracle::new().reply(PromptId::Evolve, "", &reply);
        let err = evolve_task(&rec("x", "Insert a chart"), &oracle, &EvolutionConfig::default(), 0).unwrap_err();
        assert!(matches!(err, DataflowError::Validation(_)));
    }

    #[test]
    fn corpus_reaches_target_multiplier() {
        let records: Vec<_> = (0..4).map(|i| rec(&format!("r{i}"), "Highlight the heading text")).collect();
        let (all, stats) = evolve_corpus(&records, &RuleOracle, &EvolutionConfig::default());
        assert_eq!(stats.accepted, 6);
        assert_eq!(all.len(), 10);
        let again = evolve_corpus(&records, &RuleOracle, &EvolutionConfig::default()).0;
        assert_eq!(all, again);
    }
}
