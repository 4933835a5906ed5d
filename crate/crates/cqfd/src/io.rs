//! Reading and writing queries, dependencies, instances and answers.
//!
//! An instance is either a directory holding one `<relation>.csv` file per
//! relation, or a single JSON file `{"R": [["a", "b"], ...], ...}`. CSV
//! files have no header; lines starting with `#` are comments (the writer
//! uses one to record the relation and its arity). Relations of the query
//! without a file are empty.
//!
//! Values are written as in the rest of the crate: a constant by its name,
//! `⊥` for the placeholder, `(a,b)` for a pair.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cqfd_core::instance::{Instance, Relation, Symbols, Value};
use cqfd_core::parse::{parse_query, parse_schema};
use cqfd_core::transform::Answer;
use cqfd_core::{Query, Schema, Var};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: cqfd_core::Error },
}

impl IoError {
    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.into() }
    }

    /// The core error behind this one, if any.
    pub fn core(&self) -> Option<&cqfd_core::Error> {
        match self {
            IoError::Core { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn create_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn read_query(path: &Path) -> Result<Query, IoError> {
    parse_query(&read_text(path)?).map_err(|source| IoError::Core { path: path.to_path_buf(), source })
}

/// Reads the dependency file (no file: no dependencies).
pub fn read_schema(q: &Query, path: Option<&Path>) -> Result<Schema, IoError> {
    let (text, shown) = match path {
        Some(p) => (read_text(p)?, p.to_path_buf()),
        None => (String::new(), PathBuf::from("<no dependencies>")),
    };
    parse_schema(q, &text).map_err(|source| IoError::Core { path: shown, source })
}

/// Parses a rendered value: `⊥`, `(a,b)` (nested), or a constant name.
pub fn parse_value(symbols: &mut Symbols, text: &str) -> Result<Value, String> {
    let text = text.trim();
    if text == "⊥" {
        return Ok(Value::Bottom);
    }
    if let Some(inner) = text.strip_prefix('(') {
        let inner = inner.strip_suffix(')').ok_or_else(|| format!("unbalanced pair {text:?}"))?;
        let mut depth = 0usize;
        for (i, c) in inner.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.checked_sub(1).ok_or_else(|| format!("unbalanced pair {text:?}"))?,
                ',' if depth == 0 => {
                    let a = parse_value(symbols, &inner[..i])?;
                    let b = parse_value(symbols, &inner[i + 1..])?;
                    return Ok(Value::pair(a, b));
                }
                _ => {}
            }
        }
        return Err(format!("pair {text:?} has no top-level comma"));
    }
    if text.is_empty() {
        return Err("empty value".into());
    }
    Ok(symbols.intern(text))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, IoError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })
}

/// Reads the instance for `q` from a directory of CSV files or a JSON file.
pub fn read_instance(path: &Path, q: &Query) -> Result<Instance, IoError> {
    let arities = q.arities().map_err(|source| IoError::Core { path: path.to_path_buf(), source })?;
    let mut inst = Instance::new();
    if path.is_dir() {
        for (rel, &arity) in &arities {
            let file = path.join(format!("{rel}.csv"));
            let mut r = Relation::new(arity);
            if file.exists() {
                let mut reader = csv_reader(&file)?;
                for (line, rec) in reader.records().enumerate() {
                    let rec = rec.map_err(|source| IoError::Csv { path: file.clone(), source })?;
                    if rec.len() == 1 && rec[0].is_empty() {
                        continue;
                    }
                    if rec.len() != arity {
                        return Err(IoError::format(
                            &file,
                            format!("record {} has {} fields, relation {rel} has arity {arity}", line + 1, rec.len()),
                        ));
                    }
                    let mut t = Vec::with_capacity(arity);
                    for field in rec.iter() {
                        t.push(parse_value(inst.symbols_mut(), field).map_err(|m| IoError::format(&file, m))?);
                    }
                    r.push(t).map_err(|source| IoError::Core { path: file.clone(), source })?;
                }
            }
            inst.insert_relation(rel, r);
        }
        return Ok(inst);
    }
    let text = read_text(path)?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::format(path, format!("invalid JSON: {e}")))?;
    let obj = json.as_object().ok_or_else(|| IoError::format(path, "expected an object of relations"))?;
    for (rel, &arity) in &arities {
        let mut r = Relation::new(arity);
        if let Some(rows) = obj.get(rel.as_ref()) {
            let rows = rows.as_array().ok_or_else(|| IoError::format(path, format!("{rel}: expected a list of rows")))?;
            for row in rows {
                let row = row.as_array().ok_or_else(|| IoError::format(path, format!("{rel}: rows must be lists")))?;
                if row.len() != arity {
                    return Err(IoError::format(path, format!("{rel}: row of length {} for arity {arity}", row.len())));
                }
                let mut t = Vec::with_capacity(arity);
                for v in row {
                    let s = match v {
                        serde_json::Value::String(s) => s.clone(),
                        serde_json::Value::Number(n) => n.to_string(),
                        other => return Err(IoError::format(path, format!("{rel}: unsupported value {other}"))),
                    };
                    t.push(parse_value(inst.symbols_mut(), &s).map_err(|m| IoError::format(path, m))?);
                }
                r.push(t).map_err(|source| IoError::Core { path: path.to_path_buf(), source })?;
            }
        }
        inst.insert_relation(rel, r);
    }
    Ok(inst)
}

/// Writes one `<relation>.csv` per relation (in tuple order).
pub fn write_instance_csv(dir: &Path, inst: &Instance) -> Result<(), IoError> {
    create_dir(dir)?;
    for (name, rel) in inst.relations() {
        let path = dir.join(format!("{name}.csv"));
        let mut out = Vec::new();
        writeln!(out, "# {name}/{}", rel.arity()).expect("writing to memory");
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            for t in rel.tuples() {
                w.write_record(inst.symbols().render_tuple(t))
                    .map_err(|source| IoError::Csv { path: path.clone(), source })?;
            }
            w.flush().map_err(|source| IoError::File { path: path.clone(), source })?;
        }
        fs::write(&path, out).map_err(|source| IoError::File { path, source })?;
    }
    Ok(())
}

/// The instance as a JSON object of rendered rows.
pub fn instance_json(inst: &Instance) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (name, rel) in inst.relations() {
        let rows = rel.tuples().iter().map(|t| serde_json::json!(inst.symbols().render_tuple(t))).collect();
        m.insert(name.to_string(), serde_json::Value::Array(rows));
    }
    serde_json::Value::Object(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AnswerFormat {
    Csv,
    Json,
}

/// Streams answers to `out`: CSV rows under a header of head variables
/// (a Boolean query prints `true` once if satisfied), or a single JSON
/// document `{"head": [...], "answers": [[...], ...]}`.
#[allow(clippy::large_enum_variant)] // one writer per run
pub enum AnswerWriter<W: Write> {
    Csv { out: csv::Writer<W>, head: Vec<Var> },
    Json { out: W, head: Vec<Var>, rows: Vec<Vec<String>> },
}

impl<W: Write> AnswerWriter<W> {
    pub fn new(out: W, format: AnswerFormat, head: &[Var]) -> std::io::Result<Self> {
        let head = head.to_vec();
        Ok(match format {
            AnswerFormat::Csv => {
                let mut out = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(out);
                if !head.is_empty() {
                    out.write_record(head.iter().map(|v| v.name())).map_err(std::io::Error::other)?;
                }
                AnswerWriter::Csv { out, head }
            }
            AnswerFormat::Json => AnswerWriter::Json { out, head, rows: Vec::new() },
        })
    }

    pub fn write(&mut self, a: &Answer, symbols: &Symbols) -> std::io::Result<()> {
        match self {
            AnswerWriter::Csv { out, head } if head.is_empty() => {
                out.write_record(["true"]).map_err(std::io::Error::other)
            }
            AnswerWriter::Csv { out, head } => {
                out.write_record(a.render(head, symbols)).map_err(std::io::Error::other)
            }
            AnswerWriter::Json { head, rows, .. } => {
                rows.push(a.render(head, symbols));
                Ok(())
            }
        }
    }

    pub fn finish(self) -> std::io::Result<()> {
        match self {
            AnswerWriter::Csv { mut out, .. } => out.flush(),
            AnswerWriter::Json { mut out, head, rows } => {
                let head: Vec<&str> = head.iter().map(|v| v.name()).collect();
                writeln!(out, "{}", serde_json::json!({ "head": head, "answers": rows }))?;
                out.flush()
            }
        }
    }
}

/// Reads a hypergraph `{"vertices": [...], "edges": [[...], ...]}`. The
/// vertex list is optional; by default vertices are ordered by first
/// occurrence in the edges.
pub fn read_hypergraph(path: &Path) -> Result<cqfd_core::hypergraph::Hypergraph, IoError> {
    let text = read_text(path)?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::format(path, format!("invalid JSON: {e}")))?;
    let name = |v: &serde_json::Value| -> Result<String, IoError> {
        match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(IoError::format(path, format!("unsupported vertex {other}"))),
        }
    };
    let edges = json
        .get("edges")
        .and_then(|e| e.as_array())
        .ok_or_else(|| IoError::format(path, "missing \"edges\" list"))?;
    let mut vertices: Vec<String> = Vec::new();
    if let Some(vs) = json.get("vertices").and_then(|v| v.as_array()) {
        for v in vs {
            vertices.push(name(v)?);
        }
    }
    let mut lists: Vec<Vec<String>> = Vec::new();
    for e in edges {
        let e = e.as_array().ok_or_else(|| IoError::format(path, "edges must be lists"))?;
        let mut list = Vec::new();
        for v in e {
            let v = name(v)?;
            if !vertices.contains(&v) {
                vertices.push(v.clone());
            }
            list.push(v);
        }
        lists.push(list);
    }
    let vs: Vec<&str> = vertices.iter().map(String::as_str).collect();
    let es: Vec<Vec<&str>> = lists.iter().map(|l| l.iter().map(String::as_str).collect()).collect();
    let es: Vec<&[&str]> = es.iter().map(Vec::as_slice).collect();
    cqfd_core::hypergraph::Hypergraph::from_lists(&vs, &es).map_err(|source| IoError::Core { path: path.to_path_buf(), source })
}

/// The hypergraph as JSON (inverse of [`read_hypergraph`]).
pub fn hypergraph_json(g: &cqfd_core::hypergraph::Hypergraph) -> serde_json::Value {
    let vertices: Vec<&str> = g.vertices().iter().map(|v| v.name()).collect();
    let edges: Vec<Vec<&str>> = g
        .edges()
        .iter()
        .map(|e| {
            let mut vs: Vec<&Var> = e.vars.iter().collect();
            vs.sort_by_key(|v| g.rank(v));
            vs.into_iter().map(|v| v.name()).collect()
        })
        .collect();
    serde_json::json!({ "vertices": vertices, "edges": edges })
}

/// Relation name → rendered rows, for comparisons in tests and manifests.
pub fn rendered(inst: &Instance) -> BTreeMap<String, std::collections::BTreeSet<Vec<String>>> {
    inst.rendered()
}
