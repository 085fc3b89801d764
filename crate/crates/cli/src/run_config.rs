//! Layered run configuration: built-in defaults, then an optional
//! `key=value` file, then command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use nebi_core::kv::KvFile;

/// Name of the resolved configuration written into every output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

/// Error that maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kv: KvFile,
}

impl RunConfig {
    /// Overlays `file` and then `flags` onto `defaults`. An overriding key
    /// must already exist in `defaults` unless it starts with one of
    /// `open_prefixes`, whose module parser validates it later.
    pub fn resolve(defaults: KvFile, file: Option<&Path>, flags: &[(String, String)], open_prefixes: &[&str]) -> Result<Self> {
        let mut kv = defaults;
        let mut overlay = |key: &str, value: &str, origin: &str| -> Result<()> {
            if !kv.contains(key) && !open_prefixes.iter().any(|p| key.starts_with(p)) {
                return Err(usage(format!("unknown config key {key} ({origin})")));
            }
            kv.set(key, value);
            Ok(())
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let file_kv = KvFile::parse(&text, path).map_err(|e| usage(e.to_string()))?;
            for key in file_kv.keys() {
                overlay(key, file_kv.get_str(key)?, &path.display().to_string())?;
            }
        }
        for (key, value) in flags {
            overlay(key, value, "command line")?;
        }
        Ok(RunConfig { kv })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.kv.get(key).map_err(|e| usage(e.to_string()))
    }

    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.kv.write(dir.join(RESOLVED_CONFIG))?;
        Ok(())
    }
}

/// Splits repeated `--set key=value` arguments.
pub fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>> {
    sets.iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects key=value, got {s:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> KvFile {
        let mut kv = KvFile::new();
        kv.set("a", 1);
        kv.set("b", 2);
        kv.set("c", 3);
        kv
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "b=20\nc=30\n").unwrap();
        let flags = vec![("c".to_string(), "300".to_string())];
        let rc = RunConfig::resolve(defaults(), Some(&path), &flags, &[]).unwrap();
        assert_eq!(rc.get::<i32>("a").unwrap(), 1);
        assert_eq!(rc.get::<i32>("b").unwrap(), 20);
        assert_eq!(rc.get::<i32>("c").unwrap(), 300);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let flags = vec![("zzz".to_string(), "1".to_string())];
        let err = RunConfig::resolve(defaults(), None, &flags, &[]).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
        let open = vec![("m.x".to_string(), "1".to_string())];
        assert!(RunConfig::resolve(defaults(), None, &open, &["m."]).is_ok());
        assert!(parse_sets(&["novalue".to_string()]).is_err());
    }
}
