//! TOML run configuration with strict keys and dotted `--set` overrides.

use std::ops::Range;
use std::path::{Path, PathBuf};

use kchain_core::cosim::Scenario;
use kchain_core::experiments::preset;
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{file}:{line}:{col}: {msg}")]
    Parse { file: String, line: usize, col: usize, msg: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("bad override `{arg}`: {msg}")]
    Override { arg: String, msg: String },

    #[error("unknown preset `{0}` (expected fig2 or fig3)")]
    UnknownPreset(String),

    #[error("{0}")]
    Invalid(String),

    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

/// Top-level keys a config file may hold besides the scenario sections.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    preset: Option<String>,
    seeds: Option<Vec<u64>>,
    out: Option<PathBuf>,
    #[serde(rename = "name")]
    _name: Option<toml::Value>,
    #[serde(rename = "network")]
    _network: Option<toml::Value>,
    #[serde(rename = "chain")]
    _chain: Option<toml::Value>,
    #[serde(rename = "run")]
    _run: Option<toml::Value>,
}

/// Everything needed to start one or more runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub scenario: Scenario,
    pub overrides: Vec<String>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

pub fn render(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario serializes to TOML")
}

fn to_table(s: &Scenario) -> Table {
    Table::try_from(s).expect("scenario serializes to a TOML table")
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

fn parse_error(file: &str, src: &str, span: Option<Range<usize>>, msg: &str) -> ConfigError {
    let (line, col) = span.map_or((1, 1), |s| line_col(src, s.start));
    let msg = msg.trim().to_string();
    ConfigError::Parse { file: file.to_string(), line, col, msg }
}

/// Span of the first key called `name` anywhere in the document.
fn find_key(src: &str, name: &str) -> Option<Range<usize>> {
    use toml::de::{DeTable, DeValue};
    fn walk(t: &DeTable<'_>, name: &str) -> Option<Range<usize>> {
        for (k, v) in t.iter() {
            if k.get_ref().as_ref() == name {
                return Some(k.span());
            }
            if let DeValue::Table(inner) = v.get_ref() {
                if let Some(s) = walk(inner, name) {
                    return Some(s);
                }
            }
        }
        None
    }
    let doc = DeTable::parse(src).ok()?;
    walk(doc.get_ref(), name)
}

/// Name inside the first pair of backticks of a serde message.
fn quoted_name(msg: &str) -> Option<&str> {
    let a = msg.find('`')?;
    let b = msg[a + 1..].find('`')?;
    Some(&msg[a + 1..a + 1 + b])
}

fn deserialize(table: Table) -> Result<Scenario, String> {
    Value::Table(table).try_into::<Scenario>().map_err(|e| e.message().trim().to_string())
}

/// Parses a complete scenario document (the output of [`render`]).
#[cfg(test)]
pub fn parse_scenario(src: &str, file: &str) -> Result<Scenario, ConfigError> {
    toml::from_str::<Scenario>(src).map_err(|e| parse_error(file, src, e.span(), e.message()))
}

/// Recursively copies `patch` into `base`; every patched key must already exist.
fn merge(base: &mut Table, patch: Table, prefix: &str) -> Result<(), ConfigError> {
    for (k, v) in patch {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p, &path)?,
            (Some(slot), v) => *slot = coerce(slot, v),
            (None, _) => return Err(ConfigError::UnknownKey(path)),
        }
    }
    Ok(())
}

/// Keeps integers and floats interchangeable where the target type needs it.
fn coerce(old: &Value, new: Value) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Integer(_), Value::Float(x)) if x.fract() == 0.0 && x.abs() < 9.0e15 => Value::Integer(x as i64),
        (_, v) => v,
    }
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies one `a.b.c=value` override. Unknown paths are errors.
pub fn apply_override(table: &mut Table, arg: &str) -> Result<(), ConfigError> {
    let bad = |msg: &str| ConfigError::Override { arg: arg.to_string(), msg: msg.to_string() };
    let (key, raw) = arg.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut t = &mut *table;
    for p in path {
        t = match t.get_mut(*p) {
            Some(Value::Table(inner)) => inner,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        };
    }
    let new = parse_value(raw.trim());
    match t.get_mut(*last) {
        Some(Value::Table(_)) => Err(bad("cannot replace a whole section")),
        Some(slot) => {
            *slot = coerce(slot, new);
            Ok(())
        }
        // The only keys a scenario may gain are fields switched on by a
        // variant tag, which must be set together with that tag.
        None if *last == "topology" || *last == "kind" => {
            t.insert(last.to_string(), new);
            Ok(())
        }
        None => Err(ConfigError::UnknownKey(key.to_string())),
    }
}

pub fn preset_scenario(name: &str) -> Result<Scenario, ConfigError> {
    preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

/// Reads a config file: either a full scenario, or `preset = "..."` plus
/// partial `network` / `chain` / `run` sections that patch it.
pub fn load_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let file = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: file.clone(), source })?;
    let mut table: Table = toml::from_str(&src).map_err(|e| parse_error(&file, &src, e.span(), e.message()))?;
    let header: FileHeader = toml::from_str(&src).map_err(|e| {
        let span = e.span().or_else(|| quoted_name(e.message()).and_then(|k| find_key(&src, k)));
        parse_error(&file, &src, span, e.message())
    })?;
    table.remove("preset");
    table.remove("seeds");
    table.remove("out");

    let locate = |msg: String| {
        let leaf = quoted_name(&msg).map(|k| k.rsplit('.').next().unwrap_or(k));
        match leaf.and_then(|k| find_key(&src, k)) {
            Some(span) => parse_error(&file, &src, Some(span), &msg),
            None => ConfigError::Invalid(format!("{file}: {msg}")),
        }
    };
    let table = match &header.preset {
        Some(name) => {
            let mut base = to_table(&preset_scenario(name)?);
            merge(&mut base, table, "").map_err(|e| match e {
                ConfigError::UnknownKey(k) => locate(format!("unknown key `{k}`")),
                other => other,
            })?;
            base
        }
        None => table,
    };
    let scenario = deserialize(table).map_err(locate)?;
    Ok(RunConfig {
        preset: header.preset,
        seeds: header.seeds.unwrap_or_default(),
        out: header.out,
        scenario,
        overrides: Vec::new(),
    })
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        Ok(RunConfig {
            preset: Some(name.to_string()),
            scenario: preset_scenario(name)?,
            overrides: Vec::new(),
            seeds: Vec::new(),
            out: None,
        })
    }

    /// Applies `--set` overrides in order and re-checks the scenario.
    pub fn with_overrides(mut self, sets: &[String]) -> Result<Self, ConfigError> {
        if sets.is_empty() {
            return Ok(self);
        }
        let mut table = to_table(&self.scenario);
        for s in sets {
            apply_override(&mut table, s)?;
        }
        self.scenario = deserialize(table).map_err(|msg| match quoted_name(&msg) {
            Some(k) if msg.starts_with("unknown field") => ConfigError::UnknownKey(k.to_string()),
            _ => ConfigError::Invalid(msg),
        })?;
        self.overrides.extend(sets.iter().cloned());
        Ok(self)
    }
}
