//! Prompt templates and `{placeholder}` substitution with `{{` / `}}` escapes.

use super::OracleError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptId {
    /// Turns an abstract task into a concrete one with action calls.
    Instantiate,
    /// Judges whether an executed trajectory completed its task.
    Evaluate,
    /// Step-wise action prediction; also the training record layout.
    Action,
    /// Compares two plans for the same question.
    PlanEval,
    /// Makes a task slightly more demanding.
    Evolve,
}

impl PromptId {
    pub const ALL: [PromptId; 5] =
        [PromptId::Instantiate, PromptId::Evaluate, PromptId::Action, PromptId::PlanEval, PromptId::Evolve];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::Instantiate => "instantiate",
            PromptId::Evaluate => "evaluate",
            PromptId::Action => "action",
            PromptId::PlanEval => "plan_eval",
            PromptId::Evolve => "evolve",
        }
    }

    pub fn template(self) -> PromptTemplate {
        let (system, user, assistant) = match self {
            PromptId::Instantiate => (
                Some(include_str!("../../assets/prompts/instantiate.system.txt")),
                include_str!("../../assets/prompts/instantiate.user.txt"),
                None,
            ),
            PromptId::Evaluate => (
                Some(include_str!("../../assets/prompts/evaluate.system.txt")),
                include_str!("../../assets/prompts/evaluate.user.txt"),
                None,
            ),
            PromptId::Action => (
                Some(include_str!("../../assets/prompts/action.system.txt")),
                include_str!("../../assets/prompts/action.user.txt"),
                Some(include_str!("../../assets/prompts/action.assistant.txt")),
            ),
            PromptId::PlanEval => (None, include_str!("../../assets/prompts/plan_eval.user.txt"), None),
            PromptId::Evolve => (
                Some(include_str!("../../assets/prompts/evolve.system.txt")),
                include_str!("../../assets/prompts/evolve.user.txt"),
                None,
            ),
        };
        PromptTemplate { id: self, system, user, assistant }
    }

    /// Keys a structured reply must carry.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            PromptId::Instantiate => &["observation", "thought", "new_task", "actions_plan"],
            PromptId::Evaluate => &["task_quality", "task_complete", "complete_judgement", "quality_judgement"],
            PromptId::Action => &["thought", "control_label", "control_name", "function", "args", "status", "plan"],
            PromptId::PlanEval => &["Subtask1", "Subtask2", "Subtask3", "Subtask4"],
            PromptId::Evolve => &["task", "plan"],
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub system: Option<&'static str>,
    pub user: &'static str,
    /// Only the action template has one; it frames the target in training text.
    pub assistant: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl PromptTemplate {
    /// Placeholders used by the system and user parts.
    pub fn placeholders(&self) -> Result<BTreeSet<String>, OracleError> {
        let mut out = BTreeSet::new();
        for part in self.system.iter().chain(std::iter::once(&self.user)) {
            out.extend(scan(part)?.into_iter().filter_map(|t| match t {
                Token::Field(name) => Some(name.to_string()),
                Token::Literal(_) => None,
            }));
        }
        Ok(out)
    }

    /// Chat messages for a request. Every placeholder must be supplied and nothing else.
    pub fn render(&self, subs: &BTreeMap<String, String>) -> Result<Vec<Message>, OracleError> {
        let used = self.placeholders()?;
        if let Some(extra) = subs.keys().find(|k| !used.contains(*k)) {
            return Err(OracleError::Template(format!("{}: unknown placeholder `{extra}`", self.id)));
        }
        let mut messages = Vec::new();
        if let Some(system) = self.system {
            messages.push(Message { role: "system".into(), content: substitute(system, subs)? });
        }
        messages.push(Message { role: "user".into(), content: substitute(self.user, subs)? });
        Ok(messages)
    }

    /// System, user and assistant text of one supervised example.
    pub fn render_training(&self, subs: &BTreeMap<String, String>, output: &str) -> Result<Vec<Message>, OracleError> {
        let assistant = self
            .assistant
            .ok_or_else(|| OracleError::Template(format!("{} has no assistant part", self.id)))?;
        let mut messages = self.render(subs)?;
        let out = BTreeMap::from([("output".to_string(), output.to_string())]);
        messages.push(Message { role: "assistant".into(), content: substitute(assistant, &out)? });
        Ok(messages)
    }
}

enum Token<'a> {
    Literal(&'a str),
    Field(&'a str),
}

fn scan(text: &str) -> Result<Vec<Token<'_>>, OracleError> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let (mut i, mut lit_start) = (0, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                tokens.push(Token::Literal(&text[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                tokens.push(Token::Literal(&text[lit_start..i + 1]));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let close = text[i..]
                    .find('}')
                    .ok_or_else(|| OracleError::Template(format!("unclosed `{{` at byte {i}")))?;
                let name = &text[i + 1..i + close];
                if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                    return Err(OracleError::Template(format!("bad placeholder `{{{name}}}`")));
                }
                tokens.push(Token::Literal(&text[lit_start..i]));
                tokens.push(Token::Field(name));
                i += close + 1;
                lit_start = i;
            }
            b'}' => return Err(OracleError::Template(format!("stray `}}` at byte {i}"))),
            _ => i += 1,
        }
    }
    tokens.push(Token::Literal(&text[lit_start..]));
    Ok(tokens)
}

/// Substitutes `{name}` fields; `{{` and `}}` produce literal braces.
pub fn substitute(text: &str, subs: &BTreeMap<String, String>) -> Result<String, OracleError> {
    let mut out = String::with_capacity(text.len());
    for token in scan(text)? {
        match token {
            Token::Literal(s) => out.push_str(s),
            Token::Field(name) => out.push_str(
                subs.get(name)
                    .ok_or_else(|| OracleError::Template(format!("missing placeholder `{name}`")))?,
            ),
        }
    }
    Ok(out)
}
