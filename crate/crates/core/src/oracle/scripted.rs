use super::{Generation, Message, Oracle, OracleError, OracleRequest, PromptId};

/// Replies with canned text: the first entry for the request's template whose needle
/// occurs in the rendered prompt wins.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    entries: Vec<(PromptId, String, String)>,
}

impl ScriptedOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a reply; an empty needle matches any prompt for the template.
    pub fn reply(mut self, template: PromptId, needle: &str, raw: &str) -> Self {
        self.entries.push((template, needle.to_string(), raw.to_string()));
        self
    }
}

impl Oracle for ScriptedOracle {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&self, request: &OracleRequest, messages: &[Message]) -> Result<Generation, OracleError> {
        self.entries
            .iter()
            .find(|(t, needle, _)| *t == request.template && messages.iter().any(|m| m.content.contains(needle.as_str())))
            .map(|(_, _, raw)| Generation { text: raw.clone(), attempts: 1 })
            .ok_or_else(|| OracleError::Unavailable(format!("no scripted reply for {}", request.template)))
    }
}
