//! Canonical JSON trees and prediction parsing.
//!
//! Predictions arrive as free text that usually, but not always, contains a
//! JSON value. Parsing extracts the first balanced JSON value (skipping
//! markdown fences and surrounding prose by construction), and
//! canonicalizes: object keys sorted, string scalars trimmed (case kept),
//! numbers rendered through one fixed formatter. Parse failure is a value,
//! not an error, because it is itself a scored outcome.

use std::fmt;

use serde_json::Value;

/// Edge label connecting a node to its parent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKey {
    Root,
    Key(String),
    Index(usize),
}

/// Node payload: container kind or normalized scalar.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeValue {
    Object,
    Array,
    String(String),
    /// Canonical decimal rendering of the source number.
    Number(String),
    Bool(bool),
    Null,
}

impl NodeValue {
    pub fn is_scalar(&self) -> bool {
        !matches!(self, NodeValue::Object | NodeValue::Array)
    }

    /// Scalar rendering used for key-value comparison.
    pub fn render(&self) -> String {
        match self {
            NodeValue::Object => "{}".to_string(),
            NodeValue::Array => "[]".to_string(),
            NodeValue::String(s) => s.clone(),
            NodeValue::Number(n) => n.clone(),
            NodeValue::Bool(b) => b.to_string(),
            NodeValue::Null => "null".to_string(),
        }
    }
}

/// One node of a canonical tree. The label seen by tree comparison is the
/// `(key, value)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonNode {
    pub key: EdgeKey,
    pub value: NodeValue,
    pub children: Vec<JsonNode>,
}

/// A rooted, ordered, canonical JSON tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonTree {
    pub root: JsonNode,
}

fn build_node(key: EdgeKey, value: &Value) -> JsonNode {
    match value {
        Value::Object(map) => {
            // serde_json's default map already iterates in sorted key order;
            // sorting again keeps the invariant independent of that choice.
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            JsonNode {
                key,
                value: NodeValue::Object,
                children: entries
                    .into_iter()
                    .map(|(k, v)| build_node(EdgeKey::Key(k.clone()), v))
                    .collect(),
            }
        }
        Value::Array(items) => JsonNode {
            key,
            value: NodeValue::Array,
            children: items
                .iter()
                .enumerate()
                .map(|(i, v)| build_node(EdgeKey::Index(i), v))
                .collect(),
        },
        Value::String(s) => JsonNode {
            key,
            value: NodeValue::String(s.trim().to_string()),
            children: Vec::new(),
        },
        Value::Number(n) => JsonNode {
            key,
            value: NodeValue::Number(n.to_string()),
            children: Vec::new(),
        },
        Value::Bool(b) => JsonNode {
            key,
            value: NodeValue::Bool(*b),
            children: Vec::new(),
        },
        Value::Null => JsonNode {
            key,
            value: NodeValue::Null,
            children: Vec::new(),
        },
    }
}

fn node_to_value(node: &JsonNode) -> Value {
    match &node.value {
        NodeValue::Object => {
            let mut map = serde_json::Map::new();
            for child in &node.children {
                let EdgeKey::Key(k) = &child.key else {
                    unreachable!("object children carry string keys");
                };
                map.insert(k.clone(), node_to_value(child));
            }
            Value::Object(map)
        }
        NodeValue::Array => Value::Array(node.children.iter().map(node_to_value).collect()),
        NodeValue::String(s) => Value::String(s.clone()),
        NodeValue::Number(n) => {
            serde_json::from_str(n).expect("canonical number rendering re-parses")
        }
        NodeValue::Bool(b) => Value::Bool(*b),
        NodeValue::Null => Value::Null,
    }
}

impl JsonTree {
    /// Canonicalizes a parsed JSON value.
    pub fn from_value(value: &Value) -> Self {
        Self {
            root: build_node(EdgeKey::Root, value),
        }
    }

    /// Total node count, containers included.
    pub fn node_count(&self) -> usize {
        fn walk(node: &JsonNode) -> usize {
            1 + node.children.iter().map(walk).sum::<usize>()
        }
        walk(&self.root)
    }

    /// Renders back to a JSON value (already canonical).
    pub fn to_value(&self) -> Value {
        node_to_value(&self.root)
    }

    /// Flattens to `(path, scalar)` pairs, one per scalar leaf. Path
    /// segments join with `/`; literal `~` and `/` in keys escape as `~0`
    /// and `~1`, so distinct key chains produce distinct paths.
    pub fn flatten(&self) -> Vec<(String, String)> {
        fn escape(key: &str) -> String {
            key.replace('~', "~0").replace('/', "~1")
        }
        fn walk(node: &JsonNode, path: &str, out: &mut Vec<(String, String)>) {
            let own = match &node.key {
                EdgeKey::Root => path.to_string(),
                EdgeKey::Key(k) => format!("{path}/{}", escape(k)),
                EdgeKey::Index(i) => format!("{path}/{i}"),
            };
            if node.value.is_scalar() {
                out.push((own, node.value.render()));
            } else {
                for child in &node.children {
                    walk(child, &own, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, "", &mut out);
        out
    }
}

impl fmt::Display for JsonTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_value())
    }
}

/// Outcome of [`parse_prediction`]: a canonical tree or a recorded failure.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Parsed(JsonTree),
    Unparsed,
}

impl Prediction {
    pub fn is_parsed(&self) -> bool {
        matches!(self, Prediction::Parsed(_))
    }

    pub fn tree(&self) -> Option<&JsonTree> {
        match self {
            Prediction::Parsed(t) => Some(t),
            Prediction::Unparsed => None,
        }
    }
}

/// Finds the end index (inclusive) of the balanced JSON container starting
/// at `start`, honoring string literals and escapes.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts and canonicalizes the first parseable JSON value in `raw`.
///
/// Tries every balanced `{...}` / `[...]` candidate left to right, which
/// skips markdown fences and prose without special-casing them; falls back
/// to parsing the whole trimmed text (bare scalars). Anything else is
/// [`Prediction::Unparsed`].
pub fn parse_prediction(raw: &str) -> Prediction {
    let bytes = raw.as_bytes();
    for start in 0..bytes.len() {
        if bytes[start] != b'{' && bytes[start] != b'[' {
            continue;
        }
        let Some(end) = balanced_end(bytes, start) else {
            continue;
        };
        if let Ok(value) = serde_json::from_str::<Value>(&raw[start..=end]) {
            return Prediction::Parsed(JsonTree::from_value(&value));
        }
    }
    let trimmed = raw.trim();
    if !trimmed.is_empty() {
        if let Ok(value) = serde_json::from_str::<Value>(trimmed) {
            return Prediction::Parsed(JsonTree::from_value(&value));
        }
    }
    Prediction::Unparsed
}
