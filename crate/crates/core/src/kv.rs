//! Line-oriented `key = value` text used by design files, experiment configs
//! and dataset manifests.
//!
//! ```text
//! # comment
//! section.key = value   # trailing comment
//! ```
//!
//! Keys are `[A-Za-z0-9_.]+`, each may appear once, and values run to the end
//! of the line (or a ` #` comment). Errors carry 1-based line and column.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KvDocument {
    source: String,
    entries: Vec<KvEntry>,
    index: BTreeMap<String, usize>,
}

impl KvDocument {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut doc = KvDocument {
            source: source.to_string(),
            ..Default::default()
        };
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = strip_comment(raw);
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                let col = content.len() - content.trim_start().len() + 1;
                return Err(doc.error_at(line, col, "expected `key = value`"));
            };
            let key_part = &content[..eq];
            let key = key_part.trim();
            let key_col = key_part.len() - key_part.trim_start().len() + 1;
            if key.is_empty() {
                return Err(doc.error_at(line, eq + 1, "missing key before `=`"));
            }
            if let Some(off) = key
                .char_indices()
                .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '.'))
                .map(|(i, _)| i)
            {
                return Err(doc.error_at(line, key_col + off, "invalid character in key"));
            }
            let value_part = &content[eq + 1..];
            let value = value_part.trim();
            let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
            if doc.index.contains_key(key) {
                return Err(doc.error_at(line, key_col, &format!("duplicate key `{key}`")));
            }
            doc.index.insert(key.to_string(), doc.entries.len());
            doc.entries.push(KvEntry {
                key: key.to_string(),
                value: value.to_string(),
                line,
                column: value_col,
            });
        }
        Ok(doc)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn entries(&self) -> &[KvEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&KvEntry> {
        self.index.get(key).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn error_at(&self, line: usize, column: usize, message: &str) -> Error {
        Error::Parse {
            source_name: self.source.clone(),
            line,
            column,
            message: message.to_string(),
        }
    }

    pub fn entry_error(&self, entry: &KvEntry, message: impl Display) -> Error {
        self.error_at(entry.line, entry.column, &format!("{}: {message}", entry.key))
    }

    /// Parses `key` if present.
    pub fn parse_opt<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.entry_error(e, err)),
        }
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Comma separated list.
    pub fn parse_list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        if e.value.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|item| item.trim().parse::<T>().map_err(|err| self.entry_error(e, err)))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn parse_bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                other => Err(self.entry_error(e, format!("expected a boolean, got `{other}`"))),
            },
        }
    }

    /// Rejects keys under `prefix` that are not in `known`.
    pub fn check_known(&self, prefix: &str, known: &[&str]) -> Result<()> {
        for e in &self.entries {
            if let Some(rest) = e.key.strip_prefix(prefix) {
                if !known.contains(&rest) {
                    return Err(self.error_at(
                        e.line,
                        1,
                        &format!("unknown key `{}`", e.key),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    if line.trim_start().starts_with('#') {
        return "";
    }
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Writes `key = value` lines in insertion order.
#[derive(Debug, Default, Clone)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        self.out.push_str("# ");
        self.out.push_str(text);
        self.out.push('\n');
        self
    }

    pub fn put(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.out.push_str(&format!("{key} = {value}\n"));
        self
    }

    pub fn put_list<T: Display>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.put(key, joined)
    }

    pub fn finish(self) -> String {
        self.out
    }
}
