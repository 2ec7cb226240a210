//! Runtime tool registry: each tool is probed for availability at call time
//! and unavailable tools defer to their fallback.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::Value;

pub type Probe = Arc<dyn Fn() -> bool + Send + Sync>;
pub type Handler = Arc<dyn Fn(&Value) -> Result<Value, String> + Send + Sync>;

#[derive(Clone)]
pub struct ToolEntry {
    pub name: String,
    pub probe: Probe,
    pub handler: Handler,
    pub fallback: Option<String>,
}

impl ToolEntry {
    pub fn new(
        name: impl Into<String>,
        probe: impl Fn() -> bool + Send + Sync + 'static,
        handler: impl Fn(&Value) -> Result<Value, String> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            probe: Arc::new(probe),
            handler: Arc::new(handler),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, name: impl Into<String>) -> Self {
        self.fallback = Some(name.into());
        self
    }
}

impl std::fmt::Debug for ToolEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToolEntry")
            .field("name", &self.name)
            .field("fallback", &self.fallback)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool {0} is already registered")]
    Duplicate(String),
    #[error("fallback chain from {0} forms a cycle")]
    Cycle(String),
    #[error("unknown tool {0}")]
    UnknownToolName(String),
    #[error("no tool available; probed {}", chain.join(" -> "))]
    NoToolAvailable { chain: Vec<String> },
    #[error("tool {tool} failed: {reason}")]
    Handler { tool: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub result: Value,
    /// Tool that produced `result`.
    pub used: String,
    /// Every tool probed, in order, ending with `used`.
    pub chain: Vec<String>,
}

impl Invocation {
    pub fn used_fallback(&self) -> bool {
        self.chain.len() > 1
    }
}

#[derive(Debug, Default, Clone)]
pub struct ToolRegistry {
    tools: HashMap<String, ToolEntry>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fallbacks may name tools registered later, but a cycle is rejected.
    pub fn register(&mut self, entry: ToolEntry) -> Result<(), RegistryError> {
        if self.tools.contains_key(&entry.name) {
            return Err(RegistryError::Duplicate(entry.name));
        }
        let name = entry.name.clone();
        self.tools.insert(name.clone(), entry);
        if let Some(start) = self.find_cycle() {
            self.tools.remove(&name);
            return Err(RegistryError::Cycle(start));
        }
        Ok(())
    }

    fn find_cycle(&self) -> Option<String> {
        let mut names: Vec<&String> = self.tools.keys().collect();
        names.sort();
        for start in names {
            let mut at = start;
            let mut steps = 0;
            while let Some(next) = self.tools.get(at).and_then(|t| t.fallback.as_ref()) {
                steps += 1;
                if next == start || steps > self.tools.len() {
                    return Some(start.clone());
                }
                at = next;
            }
        }
        None
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.tools.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn invoke(&self, name: &str, args: &Value) -> Result<Invocation, RegistryError> {
        let mut entry = self
            .tools
            .get(name)
            .ok_or_else(|| RegistryError::UnknownToolName(name.to_string()))?;
        let mut chain = Vec::new();
        loop {
            chain.push(entry.name.clone());
            if (entry.probe)() {
                let result = (entry.handler)(args).map_err(|reason| RegistryError::Handler {
                    tool: entry.name.clone(),
                    reason,
                })?;
                return Ok(Invocation {
                    result,
                    used: entry.name.clone(),
                    chain,
                });
            }
            match entry.fallback.as_ref().and_then(|f| self.tools.get(f)) {
                Some(next) => entry = next,
                None => return Err(RegistryError::NoToolAvailable { chain }),
            }
        }
    }
}
