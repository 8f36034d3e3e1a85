//! Parameter resolution: built-in defaults, then the optional JSON config
//! file, then command-line flags.
//!
//! A config file is a JSON object. Top-level `seed`, `workers`, `cache_dir`
//! apply to every subcommand; a key named after the subcommand holds its
//! parameters, e.g. `{"seed": 7, "evolve": {"cutoff": 32, "t": 1.0}}`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Globals {
    seed: Option<u64>,
    workers: Option<usize>,
    cache_dir: Option<PathBuf>,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub rebuild_cache: bool,
}

pub const DEFAULT_SEED: u64 = 0;

pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self { root: Map::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("{}: invalid JSON", path.display()))?;
        match value {
            Value::Object(root) => Ok(Self { root }),
            _ => bail!("{}: config must be a JSON object", path.display()),
        }
    }

    fn globals(&self) -> Result<Globals> {
        let mut g = Map::new();
        for key in ["seed", "workers", "cache_dir"] {
            if let Some(v) = self.root.get(key) {
                g.insert(key.into(), v.clone());
            }
        }
        serde_json::from_value(Value::Object(g)).context("config file: invalid global setting")
    }

    /// Check that every top-level key is a global or a known subcommand.
    pub fn validate_keys(&self, commands: &[&str]) -> Result<()> {
        for key in self.root.keys() {
            let known = ["seed", "workers", "cache_dir"].contains(&key.as_str())
                || commands.contains(&key.as_str());
            if !known {
                bail!("config file: unknown key {key:?}");
            }
        }
        Ok(())
    }

    pub fn context(
        &self,
        seed: Option<u64>,
        workers: Option<usize>,
        cache_dir: Option<PathBuf>,
        rebuild_cache: bool,
    ) -> Result<Context> {
        let g = self.globals()?;
        let workers = workers.or(g.workers).unwrap_or(0);
        Ok(Context {
            seed: seed.or(g.seed).unwrap_or(DEFAULT_SEED),
            workers,
            cache_dir: cache_dir.or(g.cache_dir),
            rebuild_cache,
        })
    }

    /// Merge defaults, the file section for `command`, and non-null flags.
    pub fn resolve<P, F>(&self, command: &str, flags: &F) -> Result<P>
    where
        P: DeserializeOwned,
        F: Serialize,
    {
        let mut merged = match self.root.get(command) {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => bail!("config file: section {command:?} must be an object"),
            None => Map::new(),
        };
        if let Value::Object(f) = serde_json::to_value(flags)? {
            for (k, v) in f {
                if !v.is_null() {
                    merged.insert(k, v);
                }
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(merged))?;
        serde_json::from_str(&text).map_err(|e| {
            anyhow::anyhow!("invalid parameters for {command} (line {} of the merged settings):\n{text}\n{e}", e.line())
        })
    }
}
