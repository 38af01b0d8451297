//! Key=value config files with `[section]` headers, one section per
//! subcommand. Flags override file values; unknown sections or keys are
//! rejected before any computation starts.

use std::collections::BTreeMap;
use std::path::Path;

use super::CliError;

/// Known `(section, key)` pairs; anything else is a usage error.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "project",
        &[
            "input",
            "t",
            "q",
            "seed",
            "output",
            "output-dir",
            "format",
            "shared-basis",
            "stats",
            "trim",
            "skip-normalize",
        ],
    ),
    (
        "estimate",
        &[
            "input",
            "rho",
            "penalty",
            "output",
            "trim",
            "skip-normalize",
            "samples",
            "project-t",
            "project-q",
            "seed",
        ],
    ),
    (
        "tsee",
        &["precision", "network", "alpha", "direct", "cap", "output"],
    ),
    ("partials", &["precision", "output", "format", "cap"]),
    (
        "jsvd",
        &[
            "inputs",
            "m",
            "rho",
            "output-model",
            "output-dir",
            "project-t",
            "project-q",
            "seed",
            "weight-by-scans",
            "trim",
            "skip-normalize",
        ],
    ),
    (
        "validate",
        &[
            "manifest",
            "repetitions",
            "group-size",
            "seed",
            "dimensions",
            "rhos",
            "alphas",
            "methods",
            "network",
            "q",
            "output-csv",
            "output-json",
            "jobs",
        ],
    ),
    ("icc", &["ratings", "manifest", "output"]),
    ("distance", &["precision", "maps-a", "maps-b", "output"]),
    ("densify", &["precision", "output", "format", "cap"]),
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                let name = line[1..line.len() - 1].trim().to_string();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(CliError::Usage(format!(
                        "config line {}: unknown section [{name}]",
                        lineno + 1
                    )));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let section = section.as_deref().ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: key '{key}' appears before any [section]",
                    lineno + 1
                ))
            })?;
            let allowed = KNOWN_KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| keys.contains(&key))
                .unwrap_or(false);
            if !allowed {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}' in section [{section}]",
                    lineno + 1
                )));
            }
            entries.insert(format!("{section}.{key}"), value.to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&format!("{section}.{key}"))
            .map(|s| s.as_str())
    }
}

/// Flag-over-config resolution for one command section.
pub struct Merge<'a> {
    pub section: &'static str,
    pub config: &'a ConfigFile,
}

impl Merge<'_> {
    pub fn string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.config.get(self.section, key).map(|s| s.to_string()))
    }

    pub fn required_string(&self, flag: Option<String>, key: &str) -> Result<String, CliError> {
        self.string(flag, key).ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{key} (or [{}] {key}= in the config file)",
                self.section
            ))
        })
    }

    pub fn parse<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(self.section, key) {
            None => Ok(None),
            Some(text) => text.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!(
                    "config [{}] {key}: cannot parse '{text}'",
                    self.section
                ))
            }),
        }
    }

    pub fn required<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<T, CliError> {
        self.parse(flag, key)?.ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{key} (or [{}] {key}= in the config file)",
                self.section
            ))
        })
    }

    /// CLI boolean flags win when set; otherwise the config value applies.
    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        match self.config.get(self.section, key) {
            None => Ok(false),
            Some(text) => match text {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(CliError::Usage(format!(
                    "config [{}] {key}: expected a boolean, got '{other}'",
                    self.section
                ))),
            },
        }
    }

    /// Multi-value field: the flag list wins when non-empty; the config
    /// value is comma-separated.
    pub fn list(&self, flag: Vec<String>, key: &str) -> Vec<String> {
        if !flag.is_empty() {
            return flag;
        }
        match self.config.get(self.section, key) {
            None => Vec::new(),
            Some(text) => text
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }
}
