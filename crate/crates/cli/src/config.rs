//! Sectioned key = value configuration.
//!
//! ```text
//! # comment
//! include = common.cfg      # relative to this file, merged in place
//! [solver]
//! n = 64
//! nu = 1e-3
//! ```
//!
//! Keys before the first section header belong to `global`. Later
//! definitions override earlier ones, so a file can include defaults and
//! then adjust them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug)]
pub enum ConfigError {
    Missing(PathBuf),
    Io(PathBuf, std::io::Error),
    Syntax { path: PathBuf, line: usize, msg: String },
    Value { key: String, msg: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Missing(p) => write!(f, "config file not found: {}", p.display()),
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Syntax { path, line, msg } => write!(f, "{}:{line}: {msg}", path.display()),
            ConfigError::Value { key, msg } => write!(f, "config key `{key}`: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default)]
pub struct Config {
    /// section -> key -> (value, directory of the defining file)
    values: BTreeMap<String, BTreeMap<String, (String, PathBuf)>>,
}

const MAX_INCLUDE_DEPTH: usize = 16;

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut stack = BTreeSet::new();
        cfg.load_into(path, &mut stack)?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn parse_str(text: &str, dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        cfg.parse_into(text, Path::new("<string>"), dir, &mut BTreeSet::new())?;
        Ok(cfg)
    }

    fn load_into(&mut self, path: &Path, stack: &mut BTreeSet<PathBuf>) -> Result<(), ConfigError> {
        if !path.exists() {
            return Err(ConfigError::Missing(path.to_path_buf()));
        }
        let canon = path.canonicalize().map_err(|e| ConfigError::Io(path.into(), e))?;
        if stack.contains(&canon) || stack.len() >= MAX_INCLUDE_DEPTH {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: 0,
                msg: "include cycle".into(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e))?;
        let dir = canon.parent().map(Path::to_path_buf).unwrap_or_default();
        stack.insert(canon.clone());
        let r = self.parse_into(&text, path, &dir, stack);
        stack.remove(&canon);
        r
    }

    fn parse_into(
        &mut self,
        text: &str,
        path: &Path,
        dir: &Path,
        stack: &mut BTreeSet<PathBuf>,
    ) -> Result<(), ConfigError> {
        let mut section = "global".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ConfigError::Syntax {
                path: path.into(),
                line: i + 1,
                msg: msg.into(),
            };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header"))?.trim();
                if name.is_empty() {
                    return Err(err("empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err("empty key"));
            }
            if key == "include" {
                self.load_into(&dir.join(value), stack)?;
                continue;
            }
            self.values
                .entry(section.clone())
                .or_default()
                .insert(key.to_string(), (value.to_string(), dir.to_path_buf()));
        }
        Ok(())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.values
            .entry(section.into())
            .or_default()
            .insert(key.into(), (value.into(), PathBuf::from(".")));
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.values.contains_key(section)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(section)?.get(key).map(|v| v.0.as_str())
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                key: format!("{section}.{key}"),
                msg: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| ConfigError::Value {
            key: format!("{section}.{key}"),
            msg: "required but missing".into(),
        })
    }

    /// Path value resolved against the directory of the defining file.
    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        let (v, dir) = self.values.get(section)?.get(key)?;
        let p = PathBuf::from(v);
        Some(if p.is_absolute() { p } else { dir.join(p) })
    }

    /// Comma-separated list of paths.
    pub fn paths(&self, section: &str, key: &str) -> Vec<PathBuf> {
        let Some((v, dir)) = self.values.get(section).and_then(|s| s.get(key)) else {
            return Vec::new();
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let p = PathBuf::from(s);
                if p.is_absolute() {
                    p
                } else {
                    dir.join(p)
                }
            })
            .collect()
    }

    /// Wavevector list `kx,ky; kx,ky; ...`.
    pub fn modes(&self, section: &str, key: &str) -> Result<Vec<(i64, i64)>, ConfigError> {
        let Some(v) = self.raw(section, key) else { return Ok(Vec::new()) };
        let bad = |s: &str| ConfigError::Value {
            key: format!("{section}.{key}"),
            msg: format!("expected `kx,ky` pairs separated by `;`, got `{s}`"),
        };
        v.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|p| {
                let (a, b) = p.split_once(',').ok_or_else(|| bad(p))?;
                Ok((a.trim().parse().map_err(|_| bad(p))?, b.trim().parse().map_err(|_| bad(p))?))
            })
            .collect()
    }

    /// Resolved configuration as sorted `section.key = value` lines.
    pub fn snapshot(&self) -> Vec<String> {
        self.values
            .iter()
            .flat_map(|(s, kv)| kv.iter().map(move |(k, v)| format!("{s}.{k} = {}", v.0)))
            .collect()
    }
}
