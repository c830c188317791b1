//! Structural checker for training records, applied to their serialized form so field
//! names are verified exactly. The agent's state uses the same input checker.

use super::records::TrainingRecord;
use crate::env_sim::{registry, ControlType};
use serde_json::{Map, Value};

const INPUT_KEYS: [&str; 4] = ["available_controls", "user_request", "step_history", "previous_plan"];
const OUTPUT_KEYS: [&str; 7] = ["thought", "control_label", "control_name", "function", "args", "status", "plan"];
const CONTROL_KEYS: [&str; 3] = ["label", "control_text", "control_type"];
const HISTORY_KEYS: [&str; 7] = ["step", "control_label", "control_name", "function", "args", "status", "result"];

type Check = Result<(), String>;

fn object<'a>(v: &'a Value, what: &str, keys: &[&str]) -> Result<&'a Map<String, Value>, String> {
    let obj = v.as_object().ok_or_else(|| format!("{what} is not an object"))?;
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(format!("{what} lacks `{k}`"));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(format!("{what} has unexpected key `{extra}`"));
    }
    Ok(obj)
}

fn string<'a>(obj: &'a Map<String, Value>, key: &str, what: &str) -> Result<&'a str, String> {
    obj[key].as_str().ok_or_else(|| format!("{what}.{key} is not a string"))
}

fn string_list(obj: &Map<String, Value>, key: &str, what: &str) -> Check {
    match obj[key].as_array() {
        Some(items) if items.iter().all(Value::is_string) => Ok(()),
        _ => Err(format!("{what}.{key} is not a list of strings")),
    }
}

fn status(obj: &Map<String, Value>, what: &str) -> Result<bool, String> {
    match string(obj, "status", what)? {
        "CONTINUE" => Ok(false),
        "FINISH" => Ok(true),
        other => Err(format!("{what}.status `{other}` is neither CONTINUE nor FINISH")),
    }
}

fn function(obj: &Map<String, Value>, what: &str) -> Check {
    let f = string(obj, "function", what)?;
    if !f.is_empty() && registry::lookup(f).is_none() {
        return Err(format!("{what}.function `{f}` is not registered"));
    }
    if !obj["args"].is_object() {
        return Err(format!("{what}.args is not an object"));
    }
    Ok(())
}

/// Checks the model input block of a record or an agent state.
pub fn validate_input(input: &Value) -> Check {
    let obj = object(input, "input", &INPUT_KEYS)?;
    let controls = obj["available_controls"].as_array().ok_or("input.available_controls is not a list")?;
    for c in controls {
        let c = object(c, "control", &CONTROL_KEYS)?;
        string(c, "label", "control")?;
        string(c, "control_text", "control")?;
        let ty = string(c, "control_type", "control")?;
        if !ControlType::ALL.iter().any(|t| t.as_str() == ty) {
            return Err(format!("control type `{ty}` is not a known kind"));
        }
    }
    string(obj, "user_request", "input")?;
    let history = obj["step_history"].as_array().ok_or("input.step_history is not a list")?;
    for h in history {
        let h = object(h, "step_history entry", &HISTORY_KEYS)?;
        h["step"].as_u64().ok_or("step_history entry step is not an integer")?;
        string(h, "control_label", "step_history entry")?;
        string(h, "control_name", "step_history entry")?;
        status(h, "step_history entry")?;
        function(h, "step_history entry")?;
        if !h["result"].is_object() {
            return Err("step_history entry result is not an object".into());
        }
    }
    string_list(obj, "previous_plan", "input")
}

pub fn validate_output(output: &Value) -> Check {
    let obj = object(output, "output", &OUTPUT_KEYS)?;
    string(obj, "thought", "output")?;
    string(obj, "control_label", "output")?;
    let name = string(obj, "control_name", "output")?;
    let finish = status(obj, "output")?;
    function(obj, "output")?;
    string_list(obj, "plan", "output")?;
    let f = string(obj, "function", "output")?;
    if f.is_empty() && !finish {
        return Err("output has no function but does not finish".into());
    }
    if registry::lookup(f).is_some_and(|s| s.needs_control) && name.is_empty() {
        return Err(format!("output.function `{f}` needs a control_name"));
    }
    if finish && !obj["plan"].as_array().is_some_and(Vec::is_empty) {
        return Err("a finishing output must have an empty plan".into());
    }
    Ok(())
}

pub fn validate_value(record: &Value) -> Check {
    let obj = object(record, "record", &["task_id", "step", "input", "output"])?;
    string(obj, "task_id", "record")?;
    obj["step"].as_u64().filter(|&s| s >= 1).ok_or("record.step is not a positive integer")?;
    validate_input(&obj["input"])?;
    validate_output(&obj["output"])
}

pub fn validate_record(record: &TrainingRecord) -> Check {
    validate_value(&serde_json::to_value(record).expect("record serializes"))
}

/// Checks the per-trajectory rules: steps count up from 1 and only the last record finishes.
pub fn validate_sequence(records: &[TrainingRecord]) -> Check {
    for (i, r) in records.iter().enumerate() {
        validate_record(r)?;
        if r.step != i + 1 {
            return Err(format!("{}: record {} has step {}", r.task_id, i + 1, r.step));
        }
        let last = i + 1 == records.len();
        if (r.output.status == crate::env_sim::Status::Finish) != last {
            return Err(format!("{}: only the last record may finish", r.task_id));
        }
    }
    Ok(())
}
