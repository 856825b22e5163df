//! CSV/JSON rendering, atomic file output and run manifests.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::OutputArgs;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "photonlink";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Rounds to 9 significant digits and prints the shortest representation
/// of the rounded value.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v:?}");
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("float round-trips");
    format!("{rounded:?}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Empty => String::new(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Rows with a fixed column order, plus the JSON form of the same data.
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, command: &str) -> String {
        let mut s = format!("# {TOOL} {command} schema_version={SCHEMA_VERSION}\n");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json_rows(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| {
                        let v = match v {
                            Cell::Float(x) if x.is_finite() => Value::from(*x),
                            Cell::Float(_) | Cell::Empty => Value::Null,
                            Cell::Int(x) => Value::from(*x),
                            Cell::Bool(x) => Value::from(*x),
                            Cell::Text(x) => Value::from(x.clone()),
                        };
                        (c.to_string(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// What a command produced.
pub enum Report {
    /// CSV by default, `{"rows": [...]}` under `--json`.
    Table(Table),
    /// Always JSON.
    Json(Value),
}

pub fn envelope(command: &str, mut payload: serde_json::Map<String, Value>) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    obj.insert("command".into(), command.into());
    obj.append(&mut payload);
    Value::Object(obj)
}

impl Report {
    pub fn render(&self, command: &str, json: bool) -> String {
        match self {
            Report::Table(t) if !json => t.to_csv(command),
            Report::Table(t) => {
                let mut m = serde_json::Map::new();
                m.insert("rows".into(), t.to_json_rows());
                pretty(&envelope(command, m))
            }
            Report::Json(v) => pretty(v),
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Provenance written next to every `--out` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub command: String,
    /// Arguments after the program name, exactly as given.
    pub argv: Vec<String>,
    /// Fully resolved parameters, defaults included.
    pub params: Value,
    pub master_seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes via a temporary sibling and a rename so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .with_context(|| format!("output path `{}` has no file name", path.display()))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let result = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing `{}`", path.display()))
}

/// Sends rendered output to stdout or to `--out` plus its manifest.
pub fn emit(text: &str, output: &OutputArgs, manifest: Option<&RunManifest>) -> anyhow::Result<()> {
    match &output.out {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            if let Some(m) = manifest {
                let mut body = serde_json::to_string_pretty(m)?;
                body.push('\n');
                write_atomic(&manifest_path(path), body.as_bytes())?;
            }
        }
    }
    Ok(())
}
