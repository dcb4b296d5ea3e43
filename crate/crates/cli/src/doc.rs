//! Ordered output documents.
//!
//! Objects keep insertion order, reals are written with 17 significant
//! digits (`d.dddddddddddddddde±x`), non-finite reals become `null`.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Arr(Vec<Node>),
    Obj(Vec<(String, Node)>),
}

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl Node {
    pub fn obj() -> Self {
        Node::Obj(Vec::new())
    }

    pub fn with(mut self, key: &str, value: impl Into<Node>) -> Self {
        if let Node::Obj(fields) = &mut self {
            fields.push((key.to_string(), value.into()));
        }
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0);
        s.push('\n');
        s
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Node::Arr(_) | Node::Obj(_))
    }

    fn write(&self, s: &mut String, indent: usize) {
        match self {
            Node::Null => s.push_str("null"),
            Node::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
            Node::Int(i) => write!(s, "{i}").unwrap(),
            Node::Real(v) if v.is_finite() => s.push_str(&real(*v)),
            Node::Real(_) => s.push_str("null"),
            Node::Str(t) => s.push_str(&serde_json::to_string(t).expect("string")),
            Node::Arr(items) if items.is_empty() => s.push_str("[]"),
            Node::Arr(items) if items.iter().all(Node::is_scalar) => {
                s.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        s.push_str(", ");
                    }
                    item.write(s, indent);
                }
                s.push(']');
            }
            Node::Arr(items) => {
                s.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    pad(s, indent + 1);
                    item.write(s, indent + 1);
                    s.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(s, indent);
                s.push(']');
            }
            Node::Obj(fields) if fields.is_empty() => s.push_str("{}"),
            Node::Obj(fields) => {
                s.push_str("{\n");
                for (k, (key, value)) in fields.iter().enumerate() {
                    pad(s, indent + 1);
                    s.push_str(&serde_json::to_string(key).expect("key"));
                    s.push_str(": ");
                    value.write(s, indent + 1);
                    s.push_str(if k + 1 < fields.len() { ",\n" } else { "\n" });
                }
                pad(s, indent);
                s.push('}');
            }
        }
    }
}

fn pad(s: &mut String, indent: usize) {
    for _ in 0..indent {
        s.push_str("  ");
    }
}

impl From<f64> for Node {
    fn from(v: f64) -> Self {
        Node::Real(v)
    }
}

impl From<bool> for Node {
    fn from(v: bool) -> Self {
        Node::Bool(v)
    }
}

impl From<u64> for Node {
    fn from(v: u64) -> Self {
        Node::Int(v as i64)
    }
}

impl From<usize> for Node {
    fn from(v: usize) -> Self {
        Node::Int(v as i64)
    }
}

impl From<&str> for Node {
    fn from(v: &str) -> Self {
        Node::Str(v.to_string())
    }
}

impl From<String> for Node {
    fn from(v: String) -> Self {
        Node::Str(v)
    }
}

impl From<&String> for Node {
    fn from(v: &String) -> Self {
        Node::Str(v.clone())
    }
}

impl<T: Into<Node>> From<Option<T>> for Node {
    fn from(v: Option<T>) -> Self {
        v.map_or(Node::Null, Into::into)
    }
}

impl<T: Into<Node>> From<Vec<T>> for Node {
    fn from(v: Vec<T>) -> Self {
        Node::Arr(v.into_iter().map(Into::into).collect())
    }
}

impl<T: Into<Node> + Clone> From<&[T]> for Node {
    fn from(v: &[T]) -> Self {
        Node::Arr(v.iter().cloned().map(Into::into).collect())
    }
}

/// Row-major nested array.
pub fn matrix(m: &nalgebra::DMatrix<f64>) -> Node {
    Node::Arr((0..m.nrows()).map(|i| Node::from(m.row(i).iter().copied().collect::<Vec<f64>>())).collect())
}
