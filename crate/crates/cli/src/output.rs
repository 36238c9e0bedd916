//! Artifact files and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use boxcycle::report::fmt_g;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    outputs: &'a [ManifestEntry],
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_seconds: Option<f64>,
}

pub struct Outputs {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

/// Rounds every float to 12 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r: f64 = fmt_g(x).parse().unwrap_or(x);
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("output types serialize to JSON");
    let mut s = serde_json::to_string_pretty(&round_floats(v)).unwrap();
    s.push('\n');
    s
}

/// CSV text from a header and rows of already formatted fields.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn write(
        &mut self,
        name: &str,
        kind: &'static str,
        contents: &str,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            kind,
        });
        Ok(())
    }

    pub fn write_manifest(
        &mut self,
        command: &str,
        config: &BTreeMap<String, String>,
        elapsed: Option<f64>,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "boxcycle",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            outputs: &self.entries,
            elapsed_seconds: elapsed,
        };
        let text = to_json(&manifest);
        let name = format!("{command}.manifest.json");
        let path = self.dir.join(&name);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        self.entries.push(ManifestEntry {
            path: name,
            kind: "manifest",
        });
        Ok(())
    }
}
