//! File formats: message-set CSV, scenario CSV, task-graph JSON and the
//! provenance comment header written at the top of every output file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_message_set, Message, MessageId, MessageSet, TaskGraph};
use crate::sim::{Scenario, ScenarioEntry};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub fn at(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// Reproducibility header: tool version, subcommand, effective config and
/// seed. Contains no timestamps so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub tool: String,
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(subcommand: &str) -> Self {
        Provenance {
            tool: format!("rtevo {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            config: Vec::new(),
            seed: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Header lines, each starting with `prefix` (e.g. `"# "` or `"; "`).
    pub fn render(&self, prefix: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{prefix}{}", self.tool);
        let _ = writeln!(out, "{prefix}subcommand: {}", self.subcommand);
        for (k, v) in &self.config {
            let _ = writeln!(out, "{prefix}config: {k}={v}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "{prefix}seed: {seed}");
        }
        out
    }
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::at(path, e))
}

pub fn write_with_header(
    path: &Path,
    provenance: &Provenance,
    prefix: &str,
    body: &str,
) -> Result<(), IoError> {
    let mut text = provenance.render(prefix);
    text.push_str(body);
    fs::write(path, text).map_err(|e| IoError::at(path, e))
}

/// Strips `#`-comment lines; returns the CSV payload.
pub fn csv_payload(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct MessageRow {
    id: u32,
    priority: u32,
    c: i64,
    t: i64,
    d: i64,
    j: i64,
}

pub const MESSAGE_HEADER: &str = "id,priority,c,t,d,j";

pub fn render_message_set(set: &MessageSet) -> String {
    let mut out = String::from(MESSAGE_HEADER);
    out.push('\n');
    for m in set.messages() {
        let _ = writeln!(out, "{},{},{},{},{},{}", m.id, m.priority, m.c, m.t, m.d, m.j);
    }
    out
}

pub fn write_message_set(
    path: &Path,
    set: &MessageSet,
    provenance: &Provenance,
) -> Result<(), IoError> {
    write_with_header(path, provenance, "# ", &render_message_set(set))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<&[u8]>,
    expected: &str,
) -> Result<(), IoError> {
    let headers = reader.headers().map_err(|e| IoError::format(path, e))?;
    let got = headers.iter().collect::<Vec<_>>().join(",");
    if got != expected {
        return Err(IoError::format(
            path,
            format!("expected header '{expected}', found '{got}'"),
        ));
    }
    Ok(())
}

pub fn parse_message_set(path: &Path, text: &str) -> Result<MessageSet, IoError> {
    let mut reader = csv_reader(text);
    check_header(path, &mut reader, MESSAGE_HEADER)?;
    let mut raw = Vec::new();
    for row in reader.deserialize::<MessageRow>() {
        let r = row.map_err(|e| IoError::format(path, e))?;
        raw.push(Message::new(r.id, r.priority, r.c, r.t, r.d, r.j));
    }
    validate_message_set(raw).map_err(|e| IoError::format(path, e))
}

pub fn read_message_set(path: &Path) -> Result<MessageSet, IoError> {
    parse_message_set(path, &read_to_string(path)?)
}

pub const SCENARIO_HEADER: &str = "id,offset,first_jitter,later_jitter";

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRow {
    id: u32,
    offset: i64,
    first_jitter: i64,
    later_jitter: i64,
}

/// Reads a scenario file. The horizon is not part of the file and is
/// supplied by the caller.
pub fn parse_scenario(path: &Path, text: &str, horizon: i64) -> Result<Scenario, IoError> {
    let mut reader = csv_reader(text);
    check_header(path, &mut reader, SCENARIO_HEADER)?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<ScenarioRow>() {
        let r = row.map_err(|e| IoError::format(path, e))?;
        entries.push(ScenarioEntry {
            id: MessageId(r.id),
            offset: r.offset,
            first_jitter: r.first_jitter,
            later_jitter: r.later_jitter,
        });
    }
    Ok(Scenario { entries, horizon })
}

pub fn render_scenario(s: &Scenario) -> String {
    let mut out = String::from(SCENARIO_HEADER);
    out.push('\n');
    for e in &s.entries {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.id, e.offset, e.first_jitter, e.later_jitter
        );
    }
    out
}

pub fn read_task_graph(path: &Path) -> Result<TaskGraph, IoError> {
    let text = read_to_string(path)?;
    let tg: TaskGraph = serde_json::from_str(&text).map_err(|e| IoError::format(path, e))?;
    tg.validate().map_err(|e| IoError::format(path, e))?;
    Ok(tg)
}
