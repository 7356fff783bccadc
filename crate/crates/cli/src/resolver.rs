//! Flag / config-file / environment resolution.
//!
//! Precedence: command-line flag, then config-file entry, then (for the
//! seed) the PCAV_SEED environment variable, then the built-in default.
//! Every resolved value is recorded and written as a snapshot next to the
//! run outputs; wall-clock metadata goes to a separate sidecar so outputs
//! stay byte-reproducible.

use crate::CmdError;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub struct Resolver {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    out_dir: PathBuf,
}

impl Resolver {
    pub fn new(out_dir: &Path, config: Option<&Path>) -> Result<Self, CmdError> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::user(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CmdError::user(format!(
                        "config line {} is not 'key = value': {line}",
                        lineno + 1
                    )));
                };
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
            out_dir: out_dir.to_path_buf(),
        })
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn config_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CmdError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CmdError::user(format!("config value for '{key}' does not parse: {raw}"))
            }),
        }
    }

    /// Resolve one scalar setting.
    pub fn get<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CmdError> {
        let value = match flag {
            Some(v) => v,
            None => self.config_value(key)?.unwrap_or(default),
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Resolve a list setting (comma-separated in config files).
    pub fn get_list<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Vec<T>,
        default: Vec<T>,
    ) -> Result<Vec<T>, CmdError> {
        let values = if !flag.is_empty() {
            flag
        } else if let Some(raw) = self.file.get(key) {
            raw.split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<Vec<T>, _>>()
                .map_err(|_| CmdError::user(format!("config list '{key}' does not parse: {raw}")))?
        } else {
            default
        };
        let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.resolved.insert(key.to_string(), rendered.join(","));
        Ok(values)
    }

    /// Seed resolution with the PCAV_SEED environment fallback.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64, CmdError> {
        let value = match flag {
            Some(v) => v,
            None => match self.config_value::<u64>("seed")? {
                Some(v) => v,
                None => match std::env::var("PCAV_SEED") {
                    Ok(raw) => raw
                        .parse()
                        .map_err(|_| CmdError::user(format!("PCAV_SEED does not parse: {raw}")))?,
                    Err(_) => 0,
                },
            },
        };
        self.record("seed", &value);
        Ok(value)
    }

    /// Writes the resolved-config snapshot plus the timestamp sidecar.
    pub fn finish(self, subcommand: &str) -> Result<(), CmdError> {
        let mut snapshot = format!("subcommand = {subcommand}\n");
        for (k, v) in &self.resolved {
            snapshot.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::write(self.out_dir.join("resolved_config.txt"), snapshot)
            .map_err(CmdError::internal)?;
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        std::fs::write(
            self.out_dir.join("run_meta.txt"),
            format!("unix_time = {stamp}\n"),
        )
        .map_err(CmdError::internal)?;
        Ok(())
    }
}
