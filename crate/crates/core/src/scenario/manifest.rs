//! Flat `key = value` text files. Lists are written as repeated keys and
//! keep their line order; `#` starts a comment line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    path: PathBuf,
    entries: Vec<Entry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Manifest::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(path, n + 1, "empty key"));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: n + 1,
            });
        }
        Ok(Manifest {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Directory relative paths are resolved against.
    pub fn dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn error(&self, key: &str, line: Option<usize>, msg: impl Into<String>) -> Error {
        Error::Manifest {
            path: self.path.clone(),
            key: key.to_string(),
            line,
            msg: msg.into(),
        }
    }

    /// Rejects keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        let known: BTreeSet<&str> = known.iter().copied().collect();
        match self.entries.iter().find(|e| !known.contains(e.key.as_str())) {
            Some(e) => Err(self.error(&e.key, Some(e.line), "unknown key")),
            None => Ok(()),
        }
    }

    /// Every entry of a repeated key, in file order.
    pub fn all(&self, key: &str) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.key == key).collect()
    }

    /// The single entry of a key, if present.
    pub fn get(&self, key: &str) -> Result<Option<&Entry>> {
        let all = self.all(key);
        match all.as_slice() {
            [] => Ok(None),
            [e] => Ok(Some(e)),
            [_, second, ..] => Err(self.error(key, Some(second.line), "key given more than once")),
        }
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key)?
            .ok_or_else(|| self.error(key, None, "missing required key"))
    }

    /// Parses the single value of `key`.
    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)?.map(|e| self.parse_value(e)).transpose()
    }

    pub fn parse_value<T: FromStr>(&self, e: &Entry) -> Result<T> {
        e.value
            .parse()
            .map_err(|_| self.error(&e.key, Some(e.line), format!("malformed value `{}`", e.value)))
    }

    /// Whitespace-separated numbers, exactly `N` of them.
    pub fn numbers<const N: usize>(&self, e: &Entry) -> Result<[f64; N]> {
        let parsed = self.number_list(e)?;
        parsed.try_into().map_err(|v: Vec<f64>| {
            self.error(&e.key, Some(e.line), format!("expected {N} numbers, got {}", v.len()))
        })
    }

    pub fn number_list(&self, e: &Entry) -> Result<Vec<f64>> {
        e.value
            .split_whitespace()
            .map(|w| {
                w.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.error(&e.key, Some(e.line), format!("malformed number `{w}`")))
            })
            .collect()
    }

    /// A path value resolved against `base`, which must exist.
    pub fn existing_path(&self, e: &Entry, base: &Path) -> Result<PathBuf> {
        let p = base.join(&e.value);
        if p.exists() {
            Ok(p)
        } else {
            Err(self.error(&e.key, Some(e.line), format!("file not found: {}", p.display())))
        }
    }
}
