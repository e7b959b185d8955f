//! Flat `key = value` experiment files with `[kind]` sections.
//!
//! Keys before the first section are global (`seed`, `sigma`). Every section
//! is one experiment. `#` starts a comment. Lists are comma separated and
//! integers may be written `1e7` or `10^7`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    /// The value as written, for error columns.
    pub raw: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug)]
pub struct Section {
    pub kind: String,
    pub line: usize,
    entries: BTreeMap<String, Entry>,
    used: Mutex<Vec<String>>,
}

impl Clone for Section {
    fn clone(&self) -> Self {
        Section {
            kind: self.kind.clone(),
            line: self.line,
            entries: self.entries.clone(),
            used: Mutex::new(self.used.lock().unwrap().clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub global: Section,
    pub experiments: Vec<Section>,
    /// Directory against which relative file names resolve.
    pub base_dir: PathBuf,
}

pub const KINDS: [&str; 11] = [
    "orbit-stats",
    "escape",
    "bound-check",
    "jensen",
    "mean-identity",
    "tail",
    "cutoff-verify",
    "reservoir",
    "oracle-suite",
    "decompose",
    "classify",
];

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> RunError {
    RunError::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl Section {
    fn new(kind: &str, line: usize) -> Self {
        Section {
            kind: kind.to_string(),
            line,
            entries: BTreeMap::new(),
            used: Default::default(),
        }
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key)?;
        self.used.lock().unwrap().push(key.to_string());
        Some(e)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.str(key).unwrap_or(default)
    }

    pub fn require_str(&self, key: &str) -> Result<&str, RunError> {
        self.str(key).ok_or_else(|| self.missing(key))
    }

    fn missing(&self, key: &str) -> RunError {
        parse_err(self.line, 1, format!("[{}] needs `{key}`", self.kind))
    }

    fn typed<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>, RunError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .ok_or_else(|| parse_err(e.line, e.column, format!("`{key}` must be {what}, got `{}`", e.value))),
        }
    }

    fn typed_list<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<Vec<T>>, RunError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => {
                let mut out = Vec::new();
                let mut col = e.column;
                for item in e.raw.split(',') {
                    let t = item.trim();
                    let c = col + item.len() - item.trim_start().len();
                    out.push(parse(t).ok_or_else(|| parse_err(e.line, c, format!("`{key}` entries must be {what}, got `{t}`")))?);
                    col += item.len() + 1;
                }
                Ok(Some(out))
            }
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, RunError> {
        self.typed(key, parse_real, "a finite number")
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, RunError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, RunError> {
        self.typed(key, parse_count, "a non-negative integer")
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, RunError> {
        Ok(self.u64(key)?.unwrap_or(default))
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, RunError> {
        self.u64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn u64_list(&self, key: &str) -> Result<Option<Vec<u64>>, RunError> {
        self.typed_list(key, parse_count, "non-negative integers")
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, RunError> {
        self.typed_list(key, parse_real, "finite numbers")
    }

    /// Position of a key for error messages, or the section header.
    pub fn position(&self, key: &str) -> (usize, usize) {
        self.entries.get(key).map_or((self.line, 1), |e| (e.line, e.column))
    }

    pub fn invalid(&self, key: &str, message: impl Into<String>) -> RunError {
        let (line, column) = self.position(key);
        parse_err(line, column, message)
    }

    /// Fails on keys that were never read, which are almost always typos.
    pub fn finish(&self) -> Result<(), RunError> {
        let used = self.used.lock().unwrap();
        match self.entries.iter().find(|(k, _)| !used.contains(k)) {
            None => Ok(()),
            Some((k, e)) => Err(parse_err(e.line, e.column, format!("unknown key `{k}` in [{}]", self.kind))),
        }
    }

    fn canonical(&self, out: &mut String) {
        out.push('[');
        out.push_str(&self.kind);
        out.push_str("]\n");
        for (k, e) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(&e.value);
            out.push('\n');
        }
    }
}

fn parse_real(s: &str) -> Option<f64> {
    if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.trim().parse().ok()?;
        let e: i32 = e.trim().parse().ok()?;
        return Some(b.powi(e)).filter(|x| x.is_finite());
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_count(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let x = parse_real(s)?;
    (x >= 0.0 && x.fract() == 0.0 && x < 1.8e19).then_some(x as u64)
}

fn normalize(value: &str) -> String {
    value.split(',').map(|v| v.split_whitespace().collect::<Vec<_>>().join(" ")).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Config, RunError> {
        let mut global = Section::new("global", 1);
        let mut experiments: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let column = body.len() - body.trim_start().len() + 1;
            if let Some(rest) = trimmed.strip_prefix('[') {
                let kind = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, column, "section header must end with `]`"))?
                    .trim();
                if !KINDS.contains(&kind) {
                    return Err(parse_err(line, column + 1, format!("unknown experiment kind `{kind}`")));
                }
                experiments.push(Section::new(kind, line));
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| parse_err(line, column, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(parse_err(line, column, format!("invalid key `{key}`")));
            }
            let value_col = body.find('=').unwrap() + 2 + (value.len() - value.trim_start().len());
            let raw = value.trim().to_string();
            let value = normalize(&raw);
            if value.is_empty() {
                return Err(parse_err(line, value_col, format!("`{key}` has no value")));
            }
            let section = experiments.last_mut().unwrap_or(&mut global);
            if section.entries.contains_key(key) {
                return Err(parse_err(line, column, format!("duplicate key `{key}`")));
            }
            section.entries.insert(
                key.to_string(),
                Entry {
                    value,
                    raw,
                    line,
                    column: value_col,
                },
            );
        }
        Ok(Config {
            global,
            experiments,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Config, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Replaces the global seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.global.entries.insert(
            "seed".into(),
            Entry {
                value: seed.to_string(),
                raw: seed.to_string(),
                line: 0,
                column: 0,
            },
        );
    }

    /// Sections in file order with keys sorted and whitespace collapsed.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.global.canonical(&mut s);
        for e in &self.experiments {
            e.canonical(&mut s);
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Config::canonical`].
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
