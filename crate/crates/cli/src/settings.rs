//! Config file loading and flag > environment > file resolution.

use std::env;
use std::fmt::Display;
use std::fs;
use std::path::Path;

use accimg_core::config::RunConfig;
use anyhow::{Context, Result};
use log::info;

use crate::Exit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Flag,
    Env,
    File,
    Default,
}

impl Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Origin::Flag => "flag",
            Origin::Env => "env",
            Origin::File => "config",
            Origin::Default => "default",
        })
    }
}

/// The loaded config plus a record of where each resolved value came from.
pub struct Settings {
    pub file: RunConfig,
    defaults: RunConfig,
    seen: Vec<(String, String, Origin)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let file = match path {
            None => RunConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).map_err(|e| Exit::validation(format!("{}: {e}", path.display())))?
            }
        };
        Ok(Settings { file, defaults: RunConfig::default(), seen: Vec::new() })
    }

    /// `flag`, else the config value. `get` selects the field from a config.
    pub fn value<T, F>(&mut self, key: &str, flag: Option<T>, get: F) -> T
    where
        T: Clone + PartialEq + std::fmt::Debug,
        F: Fn(&RunConfig) -> T,
    {
        let (v, origin) = match flag {
            Some(v) => (v, Origin::Flag),
            None => {
                let v = get(&self.file);
                let origin = if v == get(&self.defaults) { Origin::Default } else { Origin::File };
                (v, origin)
            }
        };
        self.seen.push((key.to_string(), format!("{v:?}"), origin));
        v
    }

    /// `flag`, else `$var`, else the config value.
    pub fn url<F>(&mut self, key: &str, flag: Option<String>, var: &str, get: F) -> Option<String>
    where
        F: Fn(&RunConfig) -> Option<String>,
    {
        let env_value = env::var(var).ok().filter(|v| !v.is_empty());
        let (v, origin) = match (flag, env_value, get(&self.file)) {
            (Some(v), _, _) => (Some(v), Origin::Flag),
            (None, Some(v), _) => (Some(v), Origin::Env),
            (None, None, Some(v)) => (Some(v), Origin::File),
            (None, None, None) => (None, Origin::Default),
        };
        self.seen.push((key.to_string(), format!("{v:?}"), origin));
        v
    }

    /// Log every resolved value with its origin.
    pub fn log_provenance(&self) {
        for (key, value, origin) in &self.seen {
            info!("setting {key} = {value} ({origin})");
        }
    }
}

/// A secret from the environment. Never logged.
pub fn secret(var: &str) -> Option<String> {
    let v = env::var(var).ok().filter(|v| !v.is_empty());
    info!("credential {var}: {}", if v.is_some() { "set" } else { "not set" });
    v
}
