//! Tool catalog and system prompt assembly.

use thiserror::Error;

use super::envelope::Envelope;
use super::{LoopConfig, Mode};
use crate::format::{DecodeError, Format};
use crate::json::decode_json;
use crate::meter::Origin;
use crate::tron::{decode_tron_batch, encode_tron_batch};
use crate::value::{Object, Value};

/// Separates individually serialized schemas in the prompt.
pub const SCHEMA_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, PartialEq)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    /// Typed parameter description, an object.
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("catalog: {0}")]
pub struct CatalogError(pub String);

impl ToolSchema {
    pub fn to_value(&self) -> Value {
        Value::object([
            ("name", Value::text(self.name.as_str())),
            ("description", Value::text(self.description.as_str())),
            ("parameters", self.parameters.clone()),
        ])
    }

    pub fn from_value(v: &Value) -> Result<ToolSchema, CatalogError> {
        let obj = v
            .as_object()
            .ok_or_else(|| CatalogError("tool schema must be an object".into()))?;
        let text = |k: &str| {
            obj.get(k)
                .and_then(Value::as_text)
                .map(str::to_owned)
                .ok_or_else(|| CatalogError(format!("tool schema field {k:?} must be a string")))
        };
        let name = text("name")?;
        if name.is_empty() {
            return Err(CatalogError("tool name is empty".into()));
        }
        let description = text("description")?;
        let parameters = obj
            .get("parameters")
            .filter(|p| p.as_object().is_some())
            .cloned()
            .ok_or_else(|| CatalogError(format!("{name}: parameters must be an object")))?;
        Ok(ToolSchema {
            name,
            description,
            parameters,
        })
    }

    /// Parameter names, taken from `properties` when present.
    pub fn parameter_names(&self) -> Vec<String> {
        let params = self.parameters.as_object();
        let props = params
            .and_then(|p| p.get("properties"))
            .and_then(Value::as_object)
            .or(params);
        props.map(|o| o.keys().map(str::to_owned).collect()).unwrap_or_default()
    }
}

/// Reads a JSON array of tool schemas; names must be unique.
pub fn load_catalog(text: &str) -> Result<Vec<ToolSchema>, CatalogError> {
    let v = decode_json(text).map_err(|e| CatalogError(e.to_string()))?;
    let Value::Array(items) = v else {
        return Err(CatalogError("expected a JSON array of tool schemas".into()));
    };
    let catalog = items
        .iter()
        .map(ToolSchema::from_value)
        .collect::<Result<Vec<_>, _>>()?;
    check_catalog(&catalog)?;
    Ok(catalog)
}

pub fn check_catalog(catalog: &[ToolSchema]) -> Result<(), CatalogError> {
    if catalog.is_empty() {
        return Err(CatalogError("catalog is empty".into()));
    }
    for (i, t) in catalog.iter().enumerate() {
        if catalog[..i].iter().any(|u| u.name == t.name) {
            return Err(CatalogError(format!("duplicate tool name {:?}", t.name)));
        }
    }
    Ok(())
}

/// The system prompt as ordered, origin-tagged sections whose
/// concatenation is the prompt text.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPrompt {
    pub sections: Vec<(Origin, String)>,
}

impl SystemPrompt {
    pub fn text(&self) -> String {
        self.sections.iter().map(|(_, s)| s.as_str()).collect()
    }

    pub fn schema_block(&self) -> &str {
        self.sections
            .iter()
            .find(|(o, _)| *o == Origin::Schema)
            .map(|(_, s)| s.as_str())
            .unwrap_or_default()
    }

    pub fn templates(&self) -> &str {
        self.sections.last().map(|(_, s)| s.as_str()).unwrap_or_default()
    }
}

fn explain(format: Format) -> &'static str {
    match format {
        Format::Json => "JSON: objects in braces with quoted keys, arrays in brackets",
        Format::Toon => {
            "TOON: one `key: value` per line, nesting by two-space indentation, `key[N]: a,b` for \
             lists, and `key[N]{f1,f2}:` followed by one comma-separated row per item for tables"
        }
        Format::Tron => {
            "TRON: JSON where repeated object shapes are declared once as `class A: f1,f2` and \
             written positionally as `A(v1,v2)`"
        }
    }
}

pub fn serialize_catalog(catalog: &[ToolSchema], format: Format, tron_batching: bool) -> String {
    let values: Vec<Value> = catalog.iter().map(ToolSchema::to_value).collect();
    if format == Format::Tron && tron_batching {
        return encode_tron_batch(&values);
    }
    values
        .iter()
        .map(|v| format.encode(v))
        .collect::<Vec<_>>()
        .join(SCHEMA_SEPARATOR)
}

/// Inverse of [`serialize_catalog`].
pub fn decode_schema_block(block: &str, format: Format, tron_batching: bool) -> Result<Vec<Value>, DecodeError> {
    if format == Format::Tron && tron_batching {
        return Ok(decode_tron_batch(block)?);
    }
    block.split(SCHEMA_SEPARATOR).map(|doc| format.decode(doc)).collect()
}

fn template_step(catalog: &[ToolSchema]) -> Envelope {
    let tool = &catalog[0];
    let mut args = Object::new();
    for name in tool.parameter_names() {
        args.insert(name, Value::text("<value>"))
            .expect("keys come from an object");
    }
    Envelope::Step {
        thought: "<why this tool call helps>".into(),
        action: tool.name.clone(),
        arguments: Value::Object(args),
    }
}

pub fn build_system_prompt(catalog: &[ToolSchema], cfg: &LoopConfig) -> SystemPrompt {
    assert!(!catalog.is_empty(), "catalog must not be empty");
    let input = cfg.format;
    let output = cfg.output_format();
    let mut intro = format!(
        "You are an assistant that solves tasks by calling tools.\n\
         Tool definitions and tool results are written in {}.\n\
         Reply with exactly one {} document per turn and nothing else: keys thought, action and \
         arguments to call a tool, or the single key final_answer when the task is done.\n",
        explain(input),
        output.label()
    );
    if output != input {
        intro.push_str(&format!("Replies use {}.\n", explain(output)));
    }
    intro.push_str("\nTools:\n\n");
    let schemas = serialize_catalog(catalog, input, cfg.tron_batching);
    let templates = format!(
        "\n\nExample tool call:\n{}\n\nExample final answer:\n{}",
        template_step(catalog).render(output),
        Envelope::Final {
            answer: "<answer>".into()
        }
        .render(output)
    );
    SystemPrompt {
        sections: vec![
            (Origin::Other, intro),
            (Origin::Schema, schemas),
            (Origin::Other, templates),
        ],
    }
}

impl LoopConfig {
    /// The notation the model must reply in.
    pub fn output_format(&self) -> Format {
        match self.mode {
            Mode::Full => self.format,
            Mode::InputOnly => Format::Json,
        }
    }
}
