//! Plain-text `key = value` configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment (also allowed after a value)
//! K     = 2
//! theta = 1
//! alpha = [1, 0.5]
//! output_dir = "out/hydro"
//! ```
//!
//! Keys are case-sensitive. Lists are bracketed and comma separated. Strings
//! may be quoted or bare. Later duplicates override earlier ones.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<Entry>,
    raw: String,
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    text: String,
}

impl Config {
    pub fn parse(src: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let lineno = i + 1;
            let body = strip_comment(line).trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line: lineno,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    line: lineno,
                    msg: format!("bad key `{key}`"),
                });
            }
            let entry = Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: lineno,
                text: line.trim_end().to_string(),
            };
            entries.retain(|e| e.key != entry.key);
            entries.push(entry);
        }
        Ok(Self {
            entries,
            raw: src.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The original file text.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Entry lines exactly as written, for echoing into output headers.
    pub fn entry_lines(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.find(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    fn find(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        self.find(key).map(|e| unquote(&e.value).to_string())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.find(key) else {
            return Ok(None);
        };
        unquote(&e.value)
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config {
                line: e.line,
                msg: format!("cannot parse `{}` for key `{key}`", e.value),
            })
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("missing required key `{key}`"),
        })
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.find(key) else {
            return Ok(None);
        };
        let v = e.value.trim();
        let inner = v
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| Error::Config {
                line: e.line,
                msg: format!("expected a bracketed list for `{key}`"),
            })?;
        if inner.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        inner
            .split(',')
            .map(|item| {
                unquote(item.trim()).parse::<T>().map_err(|_| Error::Config {
                    line: e.line,
                    msg: format!("cannot parse list item `{}` for key `{key}`", item.trim()),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_comments() {
        let cfg = Config::parse(
            "# header\nK = 2\ntheta = 1.5 # slow\nalpha = [1, 0.5]\nout = \"a # b\"\n",
        )
        .unwrap();
        assert_eq!(cfg.require::<usize>("K").unwrap(), 2);
        assert_eq!(cfg.require::<f64>("theta").unwrap(), 1.5);
        assert_eq!(cfg.get_list::<f64>("alpha").unwrap().unwrap(), vec![1.0, 0.5]);
        assert_eq!(cfg.get_str("out").unwrap(), "a # b");
        assert_eq!(cfg.entry_lines().count(), 4);
    }

    #[test]
    fn later_duplicates_win() {
        let cfg = Config::parse("K = 1\nK = 3\n").unwrap();
        assert_eq!(cfg.require::<usize>("K").unwrap(), 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("K 2").is_err());
        let cfg = Config::parse("alpha = 1, 2").unwrap();
        assert!(cfg.get_list::<f64>("alpha").is_err());
        assert!(cfg.get::<f64>("alpha").is_err());
    }
}
