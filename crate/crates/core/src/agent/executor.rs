use std::collections::HashMap;

use thiserror::Error;

use crate::json::{decode_json, encode_json, JsonStyle};
use crate::value::Value;

/// Runs a tool given its name and minimal-JSON arguments.
pub trait ToolExecutor {
    fn call(&mut self, tool: &str, arguments_json: &str) -> Option<Value>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("executor fixture: {0}")]
pub struct FixtureError(pub String);

/// Lookup table keyed by tool name and canonical argument text.
#[derive(Debug, Clone, Default)]
pub struct TableExecutor {
    table: HashMap<(String, String), Value>,
    calls: Vec<(String, String)>,
}

impl TableExecutor {
    pub fn new() -> Self {
        TableExecutor::default()
    }

    pub fn insert(&mut self, tool: &str, arguments: &Value, result: Value) {
        self.table
            .insert((tool.to_owned(), encode_json(arguments, JsonStyle::Minimal)), result);
    }

    /// Reads `{"tool": {"<argument JSON>": result, ...}, ...}`. Argument
    /// keys are re-canonicalised to minimal JSON.
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let root = decode_json(text).map_err(|e| FixtureError(e.to_string()))?;
        let tools = root
            .as_object()
            .ok_or_else(|| FixtureError("expected an object of tools".into()))?;
        let mut exec = TableExecutor::new();
        for (tool, entries) in tools.iter() {
            let entries = entries
                .as_object()
                .ok_or_else(|| FixtureError(format!("entries for {tool:?} must be an object")))?;
            for (args, result) in entries.iter() {
                let args =
                    decode_json(args).map_err(|e| FixtureError(format!("{tool}: bad argument key {args:?}: {e}")))?;
                exec.insert(tool, &args, result.clone());
            }
        }
        Ok(exec)
    }

    /// Every `(tool, arguments)` pair received so far, in order.
    pub fn calls(&self) -> &[(String, String)] {
        &self.calls
    }
}

impl ToolExecutor for TableExecutor {
    fn call(&mut self, tool: &str, arguments_json: &str) -> Option<Value> {
        self.calls.push((tool.to_owned(), arguments_json.to_owned()));
        self.table.get(&(tool.to_owned(), arguments_json.to_owned())).cloned()
    }
}
