//! Flat `key=value` config files and the flag/env/file/default resolution
//! order.
//!
//! A config file holds one `key=value` pair per line; keys are the long
//! flag names of the command it is passed to (`seed`, `batch-size`, ...).
//! Blank lines and `#` comments are ignored. Unknown keys are usage errors
//! so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Environment variable consulted for the seed when no `--seed` flag is
/// given.
pub const SEED_ENV_VAR: &str = "NOVACLASS_SEED";

/// Parsed config file (possibly empty, when no `--config` was given).
#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    /// Loads `path` if given; `None` yields an empty config. `allowed`
    /// names every key this command accepts — anything else is rejected.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config {}:{}: expected key=value, found {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !allowed.contains(&key) {
                return Err(CliError::Usage(format!(
                    "config {}:{}: unknown key {key:?} (expected one of: {})",
                    path.display(),
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Usage(format!(
                    "config {}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(FileConfig { entries })
    }

    /// Typed lookup; a present-but-malformed value is a usage error.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                CliError::Usage(format!("config key {key}={raw:?}: {e}"))
            }),
        }
    }

    /// Flag beats config beats `default`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Seed resolution: `--seed` flag, then `NOVACLASS_SEED`, then the
    /// config file, then 42. The environment variable is only consulted
    /// when no flag was given.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(seed) = flag {
            return Ok(seed);
        }
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            return raw.parse().map_err(|e| {
                CliError::Usage(format!("{SEED_ENV_VAR}={raw:?}: {e}"))
            });
        }
        Ok(self.get("seed")?.unwrap_or(42))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let path = dir.path().join("run.conf");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn parses_comments_blanks_and_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, "# run settings\n\nseed = 9\nepochs=80\n");
        let cfg = FileConfig::load(Some(&path), &["seed", "epochs"]).unwrap();
        assert_eq!(cfg.get::<u64>("seed").unwrap(), Some(9));
        assert_eq!(cfg.get::<usize>("epochs").unwrap(), Some(80));
        assert_eq!(cfg.get::<usize>("batch-size").unwrap(), None);
    }

    #[test]
    fn unknown_key_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, "epoch=80\n");
        let err = FileConfig::load(Some(&path), &["seed", "epochs"]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)), "{err}");
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn malformed_line_and_duplicate_key_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write_config(&dir, "seed\n");
        assert!(matches!(
            FileConfig::load(Some(&bad), &["seed"]),
            Err(CliError::Usage(_))
        ));
        let dup = write_config(&dir, "seed=1\nseed=2\n");
        assert!(matches!(
            FileConfig::load(Some(&dup), &["seed"]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, "epochs=80\n");
        let cfg = FileConfig::load(Some(&path), &["epochs"]).unwrap();
        assert_eq!(cfg.resolve(Some(5usize), "epochs", 60).unwrap(), 5);
        assert_eq!(cfg.resolve(None::<usize>, "epochs", 60).unwrap(), 80);
        assert_eq!(cfg.resolve(None::<usize>, "batch", 64).unwrap(), 64);
    }

    // Seed precedence against the real environment variable is covered by
    // the CLI integration tests, which control the child environment;
    // mutating the process environment here would race other tests.
    #[test]
    fn seed_falls_back_to_config_then_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, "seed=7\n");
        let cfg = FileConfig::load(Some(&path), &["seed"]).unwrap();
        if std::env::var(SEED_ENV_VAR).is_ok() {
            return; // environment owned by an outer harness; skip quietly
        }
        assert_eq!(cfg.resolve_seed(Some(3)).unwrap(), 3);
        assert_eq!(cfg.resolve_seed(None).unwrap(), 7);
        let empty = FileConfig::default();
        assert_eq!(empty.resolve_seed(None).unwrap(), 42);
    }
}
