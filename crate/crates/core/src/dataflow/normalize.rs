use super::records::{RawRecord, Source, TaskPlanRecord};
use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeConfig {
    pub min_task_chars: usize,
    pub max_task_chars: usize,
    pub max_plan_steps: usize,
    /// Minimum share of ASCII letters among all letters of task and plan.
    pub min_ascii_ratio: f64,
    /// Tasks mentioning any of these words target another platform.
    pub off_platform: Vec<String>,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            min_task_chars: 10,
            max_task_chars: 200,
            max_plan_steps: 20,
            min_ascii_ratio: 0.9,
            off_platform: ["smartphone", "iphone", "android", "ipad", "mobile"].map(String::from).to_vec(),
        }
    }
}

/// Why a raw record was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    NoTask,
    NonEnglish,
    TaskLength,
    PlanLength,
    OffPlatform,
    Duplicate,
}

/// Splits free text into a task line and its plan steps. Steps are the following lines,
/// with list markers such as `1.`, `-` or `Step 2:` removed.
pub fn parse_free_text(text: &str) -> (String, Vec<String>) {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let task = lines.next().unwrap_or_default().to_string();
    let plan = lines.map(strip_marker).filter(|l| !l.is_empty()).collect();
    (task, plan)
}

fn strip_marker(line: &str) -> String {
    let mut s = line.trim();
    if let Some(rest) = s.strip_prefix("Step ").or_else(|| s.strip_prefix("step ")) {
        s = rest;
    }
    let s = s.trim_start_matches(|c: char| c.is_ascii_digit());
    let s = s.trim_start_matches(['.', ')', ':', '-', '*', '•']);
    s.trim().to_string()
}

fn classify(task: &str, plan: &[String], cfg: &NormalizeConfig) -> Option<DropReason> {
    if task.trim().is_empty() {
        return Some(DropReason::NoTask);
    }
    let all_text = format!("{task} {}", plan.join(" "));
    if text::ascii_letter_ratio(&all_text) < cfg.min_ascii_ratio {
        return Some(DropReason::NonEnglish);
    }
    let len = task.chars().count();
    if len < cfg.min_task_chars || len > cfg.max_task_chars {
        return Some(DropReason::TaskLength);
    }
    if plan.is_empty() || plan.len() > cfg.max_plan_steps {
        return Some(DropReason::PlanLength);
    }
    let words: BTreeSet<String> = task.split(|c: char| !c.is_alphanumeric()).map(str::to_lowercase).collect();
    if cfg.off_platform.iter().any(|k| words.contains(&k.to_lowercase())) {
        return Some(DropReason::OffPlatform);
    }
    None
}

/// Filters raw records and removes duplicate tasks. Records are visited in id order so
/// the surviving duplicate does not depend on input order; output is sorted by task id.
pub fn normalize_sources(raw: &[RawRecord], cfg: &NormalizeConfig) -> (Vec<TaskPlanRecord>, BTreeMap<DropReason, usize>) {
    let mut sorted: Vec<&RawRecord> = raw.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    let mut dropped = BTreeMap::new();
    for r in sorted {
        let (task, plan) = match (&r.task, &r.text) {
            (Some(t), _) => (t.clone(), r.plan.clone().unwrap_or_default()),
            (None, Some(text)) => parse_free_text(text),
            (None, None) => (String::new(), Vec::new()),
        };
        let reason = classify(&task, &plan, cfg)
            .or_else(|| (!seen.insert(text::normalize(&task))).then_some(DropReason::Duplicate));
        match reason {
            Some(why) => *dropped.entry(why).or_insert(0) += 1,
            None => kept.push(TaskPlanRecord { task_id: r.id.clone(), task, plan, source: r.source }),
        }
    }
    kept.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    (kept, dropped)
}

/// Convenience for already structured records.
pub fn raw(id: &str, source: Source, task: &str, plan: &[&str]) -> RawRecord {
    RawRecord {
        id: id.into(),
        source,
        task: Some(task.into()),
        plan: Some(plan.iter().map(|s| s.to_string()).collect()),
        text: None,
    }
}
