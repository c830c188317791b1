use super::records::{InstantiatedTask, TaskPlanRecord};
use super::DataflowError;
use crate::env_sim::{registry, ActionCall, AppTemplate};
use crate::oracle::{str_field, Oracle, OracleRequest, PromptId};
use crate::text;
use serde_json::Value;

/// Worked example substituted into the instantiation prompt.
pub const EXAMPLES: &str = r#"<Given Task:> highlight text in document
<New Task:> Highlight the text 'Test For Fun'
<Action Plan:>
{"step": "Select the target text", "controlLabel": "", "controlText": "", "function": "select_text", "args": {"text": "Test For Fun"}}
{"step": "Highlight the selected text", "controlLabel": "", "controlText": "Text Highlight Color", "function": "click_input", "args": {"button": "left", "double": false}}"#;

/// The template whose description shares the most keywords with the task; ties go to
/// the smallest template id.
pub fn select_template<'a>(task: &str, templates: &'a [AppTemplate]) -> Result<&'a AppTemplate, DataflowError> {
    let words = text::token_set(task);
    templates
        .iter()
        .map(|t| (text::token_set(&t.description).intersection(&words).count(), t))
        .filter(|(score, _)| *score > 0)
        .max_by(|(sa, ta), (sb, tb)| sa.cmp(sb).then_with(|| tb.template_id.cmp(&ta.template_id)))
        .map(|(_, t)| t)
        .ok_or_else(|| DataflowError::NoTemplateMatch(task.to_string()))
}

/// Parses the action list of an instantiation reply: JSON objects separated by newlines
/// (or a JSON array). Unregistered functions are rejected.
pub fn parse_actions(value: &Value) -> Result<Vec<ActionCall>, DataflowError> {
    let values: Vec<Value> = match value {
        Value::Array(items) => items.clone(),
        Value::String(s) => serde_json::Deserializer::from_str(s)
            .into_iter::<Value>()
            .collect::<Result<_, _>>()
            .map_err(|e| DataflowError::Parse(format!("actions_plan: {e}")))?,
        other => return Err(DataflowError::Parse(format!("actions_plan has type {other}"))),
    };
    values
        .into_iter()
        .map(|v| {
            let action: ActionCall =
                serde_json::from_value(v).map_err(|e| DataflowError::Parse(format!("action call: {e}")))?;
            let spec = registry::lookup(&action.function)
                .ok_or_else(|| DataflowError::Parse(format!("unregistered function `{}`", action.function)))?;
            if spec.needs_control && action.control_text.trim().is_empty() {
                return Err(DataflowError::Parse(format!("{} needs a control text", spec.name)));
            }
            Ok(action)
        })
        .collect()
}

pub fn instantiate(
    record: &TaskPlanRecord,
    templates: &[AppTemplate],
    oracle: &dyn Oracle,
) -> Result<InstantiatedTask, DataflowError> {
    let template = select_template(&record.task, templates)?;
    let snap = template.snapshot();
    let request = OracleRequest::new(PromptId::Instantiate)
        .with("apis", registry::describe_apis())
        .with("examples", EXAMPLES)
        .with("given_task", record.task.clone())
        .with("reference_steps", serde_json::to_string(&record.plan).expect("plan serializes"))
        .with("doc_canvas_state", snap.canvas.to_markup())
        .with("doc_control_state", snap.control_tree_json().to_string());
    let reply = oracle.complete(&request)?;
    let new_task = str_field(&reply.parsed, "new_task")?.trim().to_string();
    if new_task.is_empty() {
        return Err(DataflowError::Parse("new_task is empty".into()));
    }
    Ok(InstantiatedTask {
        origin_task_id: record.task_id.clone(),
        instantiated_task: new_task,
        template_id: template.template_id.clone(),
        thought: str_field(&reply.parsed, "thought")?.to_string(),
        actions: parse_actions(&reply.parsed["actions_plan"])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::records::Source;
    use crate::env_sim::templates;
    use crate::oracle::{RuleOracle, ScriptedOracle};

    fn rec(task: &str) -> TaskPlanRecord {
        TaskPlanRecord { task_id: "t1".into(), task: task.into(), plan: vec!["x".into()], source: Source::Doc }
    }

    #[test]
    fn picks_template_by_overlap() {
        assert_eq!(select_template("highlight text in document", templates()).unwrap().template_id, "text_page");
        assert_eq!(select_template("Insert a chart", templates()).unwrap().template_id, "chart");
        assert_eq!(select_template("Add a border to a page in Word", templates()).unwrap().template_id, "text_page");
        assert!(matches!(select_template("Create a drop-down list in Excel", templates()), Err(DataflowError::NoTemplateMatch(_))));
        assert!(matches!(select_template("insert a chart", &[]), Err(DataflowError::NoTemplateMatch(_))));
    }

    #[test]
    fn ties_go_to_smallest_id() {
        // "doc" is a stopword, so only "with" variants differ; craft a tie on "a doc with"
        let mut ts = templates().to_vec();
        for t in &mut ts {
            t.description = "shared words".into();
        }
        assert_eq!(select_template("shared", &ts).unwrap().template_id, "chart");
    }

    #[test]
    fn highlight_instantiation() {
        let inst = instantiate(&rec("highlight text in document"), templates(), &RuleOracle).unwrap();
        assert_eq!(inst.template_id, "text_page");
        assert!(inst.instantiated_task.contains("'Test For Fun'"));
        assert_eq!(inst.actions[0].function, "select_text");
        assert_eq!(inst.actions[0].args["text"], "Test For Fun");
        assert_eq!(inst.actions[1].function, "click_input");
    }

    #[test]
    fn documented_example_parses() {
        let plan = EXAMPLES.lines().filter(|l| l.starts_with('{')).collect::<Vec<_>>().join("\n");
        let reply = serde_json::json!({"observation": "", "thought": "", "new_task": "Highlight 'Test For Fun'", "actions_plan": plan});
        let oracle = ScriptedOracle::new().reply(PromptId::Instantiate, "", &reply.to_string());
        let inst = instantiate(&rec("highlight text in document"), templates(), &oracle).unwrap();
        assert_eq!(inst.actions.len(), 2);
        assert_eq!(inst.actions[0].args["text"], "Test For Fun");
    }

    #[test]
    fn malformed_reply_is_an_error() {
        let oracle = ScriptedOracle::new().reply(PromptId::Instantiate, "", r#"{"observation": "", "thought": "", "new_task": "x", "actions_plan": "{not json"}"#);
        assert!(matches!(instantiate(&rec("highlight text in document"), templates(), &oracle), Err(DataflowError::Parse(_))));
        let unknown = serde_json::json!({"observation": "", "thought": "", "new_task": "x", "actions_plan": "{\"function\": \"fly\"}"});
        let oracle = ScriptedOracle::new().reply(PromptId::Instantiate, "", &unknown.to_string());
        assert!(instantiate(&rec("highlight text in document"), templates(), &oracle).is_err());
    }
}
