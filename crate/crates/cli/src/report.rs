use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CacheInfo {
    pub kind: &'static str,
    pub file: String,
    pub fingerprint: String,
}

impl CacheInfo {
    pub fn new(kind: &'static str, path: &Path, bytes: &[u8]) -> Self {
        Self {
            kind,
            file: path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            fingerprint: format!("{:016x}", disc_nls::cache::fingerprint(bytes)),
        }
    }
}

/// Everything a run emits. The JSON document depends only on the resolved
/// configuration and seed; wall time goes to a separate timing file.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub caches: &'a [CacheInfo],
    pub result: &'a R,
}

#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl Outputs {
    pub fn emit<C: Serialize, R: Serialize>(
        &self,
        report: &Report<'_, C, R>,
        csv: &str,
        wall: Duration,
    ) -> Result<()> {
        let text = to_json(report)?;
        match &self.json {
            Some(path) => {
                std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
                let timing = path.with_extension("timing.json");
                std::fs::write(
                    &timing,
                    format!("{{\n  \"wall_seconds\": {}\n}}\n", wall.as_secs_f64()),
                )?;
            }
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        if let Some(path) = &self.csv {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
        }
        eprintln!("{} finished in {:.3} s", report.command, wall.as_secs_f64());
        Ok(())
    }
}
