//! UTF-8 `key=value` text used by manifests, checkpoints and run configs.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Keys are unique. Floats are written with Rust's shortest round-trip
//! formatting, so reading a value back yields the identical bits.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{NebiError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    path: PathBuf,
    entries: BTreeMap<String, String>,
    order: Vec<String>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let mut kv = KvFile {
            path: path.into(),
            ..Default::default()
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| kv.err(format!("line {}: missing '='", lineno + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(kv.err(format!("line {}: empty key", lineno + 1)));
            }
            if kv.entries.contains_key(k) {
                return Err(kv.err(format!("duplicate key {k}")));
            }
            kv.order.push(k.to_string());
            kv.entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(kv)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| NebiError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| NebiError::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in &self.order {
            s.push_str(k);
            s.push('=');
            s.push_str(&self.entries[k]);
            s.push('\n');
        }
        s
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn err(&self, msg: impl Into<String>) -> NebiError {
        NebiError::Manifest {
            path: self.path.clone(),
            msg: msg.into(),
        }
    }

    /// Inserts or replaces; new keys keep insertion order.
    pub fn set(&mut self, key: &str, value: impl Display) {
        if !self.entries.contains_key(key) {
            self.order.push(key.to_string());
        }
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let s: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.set(key, s.join(","));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| self.err(format!("missing key {key}")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get_str(key)?;
        raw.parse()
            .map_err(|_| self.err(format!("key {key}: cannot parse {raw:?}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.contains(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.get_str(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| self.err(format!("key {key}: cannot parse element {p:?}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bitwise() {
        let mut kv = KvFile::new();
        let vals = [0.1f32, 1e-38, -0.0, 3.4028235e38, 0.21404114];
        kv.set_list("v", &vals);
        let back = KvFile::parse(&kv.to_text(), "x").unwrap();
        let got: Vec<f32> = back.get_list("v").unwrap();
        for (a, b) in vals.iter().zip(&got) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KvFile::parse("a=1\na=2\n", "x").is_err());
        assert!(KvFile::parse("novalue\n", "x").is_err());
        let kv = KvFile::parse("# c\n\na = 3 \n", "x").unwrap();
        assert_eq!(kv.get::<u32>("a").unwrap(), 3);
        assert!(kv.get::<u32>("b").is_err());
    }
}
