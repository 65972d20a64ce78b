//! Output files and failure classes.

use std::fmt;
use std::path::Path;

use koopman_core::model_io::{write_atomic, FORMAT_VERSION};
use koopman_core::Error as CoreError;
use serde_json::{Map, Value};

/// Failure classes, each mapped to a process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Partial { failed: usize, total: usize },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Partial { .. } => 3,
        }
    }

    /// Classifies a library error raised while processing `context`.
    pub fn from_core(context: &str, e: CoreError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            CoreError::Singular { .. }
            | CoreError::NotIdentifiable { .. }
            | CoreError::IntegrationFailed { .. }
            | CoreError::GridTooLarge { .. }
            | CoreError::Io(_) => Failure::Numerical(msg),
            _ => Failure::Config(msg),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Partial { failed, total } => {
                write!(f, "{failed} of {total} runs failed (see the summary file)")
            }
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, bytes).map_err(|e| Failure::Numerical(format!("{}: {e}", path.display())))
}

/// First line of every CSV file.
pub fn csv_preamble(hash: &str, fields: &[(&str, String)]) -> String {
    let mut s = format!("# format_version={FORMAT_VERSION} config_hash={hash}");
    for (k, v) in fields {
        s.push(' ');
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s.push('\n');
    s
}

pub fn write_csv(path: &Path, hash: &str, fields: &[(&str, String)], body: &str) -> CliResult<()> {
    let mut text = csv_preamble(hash, fields);
    text.push_str(body);
    write_file(path, text.as_bytes())
}

/// Pretty JSON with `format_version` and `config_hash` added to the top-level object.
pub fn json_document(hash: &str, body: Value) -> String {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    map.insert("format_version".into(), FORMAT_VERSION.into());
    map.insert("config_hash".into(), hash.into());
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("JSON value");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, hash: &str, body: Value) -> CliResult<()> {
    write_file(path, json_document(hash, body).as_bytes())
}

/// `[a, b]` with shortest round-trip formatting.
pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}
