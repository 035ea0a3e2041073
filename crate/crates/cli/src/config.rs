//! Flat `key = value` config files with `[section]` headers, one section per
//! subcommand plus an optional `[global]` section.
//!
//! ```text
//! # comment
//! [global]
//! jobs = 4
//!
//! [recover]
//! n = 1000
//! snr = 25
//! ```

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: key {key:?} appears before any [section]")]
    NoSection { line: usize, key: String },
    #[error("config line {line}: duplicate key {key:?} in [{section}]")]
    Duplicate { line: usize, section: String, key: String },
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
}

/// Parsed sections in file order of keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, Vec<(String, String)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            let Some(section) = &current else {
                return Err(ConfigError::NoSection { line: i + 1, key });
            };
            let entries = sections.get_mut(section).expect("section registered");
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    section: section.clone(),
                    key,
                });
            }
            entries.push((key, value));
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn section(&self, name: &str) -> &[(String, String)] {
        self.sections.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Entries rendered as command-line tokens. `true`/`false` values become
    /// bare switches or are dropped.
    pub fn as_args(&self, name: &str) -> Vec<OsString> {
        self.args_except(name, &[])
    }

    fn args_except(&self, name: &str, skip: &[String]) -> Vec<OsString> {
        let mut out = Vec::new();
        for (k, v) in self.section(name).iter().filter(|(k, _)| !skip.contains(k)) {
            match v.as_str() {
                "true" => out.push(format!("--{k}").into()),
                "false" => {}
                _ => {
                    out.push(format!("--{k}").into());
                    out.push(v.into());
                }
            }
        }
        out
    }
}

/// Finds `--config PATH` / `--config=PATH` anywhere in `args`.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Splices file values into `args`: global entries right after the program
/// name, the subcommand's entries right after the subcommand. File entries
/// whose flag also appears on the command line are dropped, so flags win.
pub fn merge_args(args: Vec<OsString>, file: &ConfigFile, subcommands: &[&str]) -> Vec<OsString> {
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut out: Vec<OsString> = Vec::with_capacity(args.len() + 8);
    let mut it = args.into_iter();
    if let Some(prog) = it.next() {
        out.push(prog);
    }
    out.extend(file.args_except("global", &given));
    let mut spliced = false;
    for a in it {
        let is_sub = !spliced && subcommands.iter().any(|s| a.to_str() == Some(*s));
        let name = a.to_string_lossy().into_owned();
        out.push(a);
        if is_sub {
            out.extend(file.args_except(&name, &given));
            spliced = true;
        }
    }
    out
}
