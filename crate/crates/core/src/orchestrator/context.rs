//! Shared conversation history and the size-bounded context each speaker sees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::design::Candidate;

pub const DEFAULT_WINDOW: usize = 12;
pub const DEFAULT_CHAR_BUDGET: usize = 8_000;
pub const MAX_SUMMARY_CHARS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub turn: usize,
    pub speaker: String,
    pub summary: String,
    /// Index of the matching trace event.
    pub payload_ref: Option<usize>,
}

/// Append-only; every message is visible to every agent once pushed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConversationHistory {
    messages: Vec<Message>,
}

impl ConversationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Broadcast a message; summaries are cut to the character cap.
    pub fn push(&mut self, speaker: &str, summary: &str, payload_ref: Option<usize>) -> &Message {
        let turn = self.messages.last().map_or(1, |m| m.turn + 1);
        self.messages.push(Message {
            turn,
            speaker: speaker.to_string(),
            summary: truncate_chars(summary, MAX_SUMMARY_CHARS),
            payload_ref,
        });
        self.messages.last().unwrap()
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

pub fn truncate_chars(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let mut out: String = s.chars().take(max.saturating_sub(3)).collect();
    out.push_str("...");
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextOptions {
    /// Most recent messages kept.
    pub window: usize,
    /// Upper bound on the rendered summary; older messages go first.
    pub char_budget: usize,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub config: Value,
    pub incumbent: Option<Candidate>,
    pub messages: Vec<Message>,
    pub capabilities: BTreeMap<String, Vec<String>>,
    /// Messages left out by the window or the budget.
    pub dropped: usize,
}

impl ContextSummary {
    pub fn render(&self) -> String {
        let mut s = format!("config: {}\n", self.config);
        match &self.incumbent {
            Some(c) => s.push_str(&format!(
                "incumbent: {:?} objective {} (eval {}, round {})\n",
                c.design,
                c.objective.map_or("-".into(), |v| v.to_string()),
                c.eval_index,
                c.round
            )),
            None => s.push_str("incumbent: none\n"),
        }
        for (agent, caps) in &self.capabilities {
            s.push_str(&format!("{agent}: {}\n", caps.join(", ")));
        }
        for m in &self.messages {
            s.push_str(&format!("[{}] {}: {}\n", m.turn, m.speaker, m.summary));
        }
        s
    }

    pub fn contains_turn(&self, turn: usize) -> bool {
        self.messages.iter().any(|m| m.turn == turn)
    }
}

/// Pinned config, incumbent and capabilities, then as many of the last
/// `window` messages as fit in the budget.
pub fn analyze_context(
    history: &ConversationHistory,
    capabilities: &BTreeMap<String, Vec<String>>,
    config: &Value,
    incumbent: Option<&Candidate>,
    opts: &ContextOptions,
) -> ContextSummary {
    let all = history.messages();
    let start = all.len().saturating_sub(opts.window);
    let mut summary = ContextSummary {
        config: config.clone(),
        incumbent: incumbent.cloned(),
        messages: all[start..].to_vec(),
        capabilities: capabilities.clone(),
        dropped: start,
    };
    while !summary.messages.is_empty() && summary.render().chars().count() > opts.char_budget {
        summary.messages.remove(0);
        summary.dropped += 1;
    }
    summary
}
