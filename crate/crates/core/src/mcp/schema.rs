//! Structural input-schema checks: argument presence and primitive type.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
}

impl ParamType {
    pub fn matches(self, v: &Value) -> bool {
        match self {
            ParamType::String => v.is_string(),
            ParamType::Integer => v.is_i64() || v.is_u64(),
            ParamType::Number => v.is_number(),
            ParamType::Boolean => v.is_boolean(),
            ParamType::Array => v.is_array(),
            ParamType::Object => v.is_object(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::Boolean => "boolean",
            ParamType::Array => "array",
            ParamType::Object => "object",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

/// Named parameters of a tool. Serializes to a JSON-Schema-shaped object.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputSchema {
    params: Vec<ParamSpec>,
}

impl InputSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn required(mut self, name: &str, ty: ParamType, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required: true,
            description: description.into(),
        });
        self
    }

    pub fn optional(mut self, name: &str, ty: ParamType, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required: false,
            description: description.into(),
        });
        self
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn to_value(&self) -> Value {
        let mut props = Map::new();
        for p in &self.params {
            let mut prop = json!({ "type": p.ty.as_str() });
            if !p.description.is_empty() {
                prop["description"] = Value::String(p.description.clone());
            }
            props.insert(p.name.clone(), prop);
        }
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({ "type": "object", "properties": props, "required": required })
    }

    /// Reads back the shape produced by [`InputSchema::to_value`].
    pub fn from_value(v: &Value) -> Option<Self> {
        let props = v.get("properties")?.as_object()?;
        let required: Vec<&str> = v
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let mut params = Vec::new();
        for (name, prop) in props {
            let ty: ParamType = serde_json::from_value(prop.get("type")?.clone()).ok()?;
            params.push(ParamSpec {
                name: name.clone(),
                ty,
                required: required.contains(&name.as_str()),
                description: prop
                    .get("description")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string(),
            });
        }
        Some(Self { params })
    }

    /// Checks presence of required parameters and the primitive type of every
    /// supplied one. Unknown extra arguments are tolerated.
    pub fn validate(&self, args: &Value) -> Result<(), String> {
        let obj = match args {
            Value::Object(o) => o,
            Value::Null => &Map::new(),
            _ => return Err("arguments must be an object".into()),
        };
        for p in &self.params {
            match obj.get(&p.name) {
                None | Some(Value::Null) if p.required => {
                    return Err(format!("missing required argument '{}'", p.name))
                }
                None | Some(Value::Null) => {}
                Some(v) if !p.ty.matches(v) => {
                    return Err(format!(
                        "argument '{}' must be of type {}",
                        p.name,
                        p.ty.as_str()
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}
