//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use gph_core::{Error, Result};

/// One parameter of a subcommand; also the name of its `--flag` and its config-file key.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    pub flag: bool,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help, flag: false }
}

pub const fn optional(name: &'static str, help: &'static str) -> Key {
    Key { name, default: None, help, flag: false }
}

pub const fn flag(name: &'static str, help: &'static str) -> Key {
    Key { name, default: Some("false"), help, flag: true }
}

/// `M`, `t_final` and `N_list` in a file map to `m`, `t-final` and `n-list`.
pub fn normalize_key(raw: &str) -> String {
    raw.trim().to_ascii_lowercase().replace('_', "-")
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        let k = normalize_key(k);
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

/// Resolved parameters of one run.
#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Params { values }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Config(format!("missing parameter `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let s = self.str(key)?;
        s.parse().map_err(|_| Error::Config(format!("cannot parse `{key}` = `{s}`")))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) if s.is_empty() => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.get(key)
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let s = self.str(key)?;
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("cannot parse `{key}` entry `{v}`"))))
            .collect()
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
        }
        Ok(v)
    }

    /// `t_final / dt`, which must be a whole number of steps.
    pub fn step_count(&self, t_final: &str, dt: &str) -> Result<usize> {
        let (t, h) = (self.get::<f64>(t_final)?, self.positive(dt)?);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("`{t_final}` must be positive, got {t}")));
        }
        let n = (t / h).round();
        if (n * h - t).abs() > 1e-9 * t || n < 2.0 {
            return Err(Error::Config(format!("{t_final} = {t} is not at least two whole steps of {dt} = {h}")));
        }
        Ok(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let c = parse_config("# run\nM = 8\nt_final=0.5 # end\nN_list=1,2,3\n\n").unwrap();
        assert_eq!(c["m"], "8");
        assert_eq!(c["t-final"], "0.5");
        let p = Params::new(c);
        assert_eq!(p.list::<usize>("n-list").unwrap(), vec![1, 2, 3]);
        assert!(parse_config("M 8").is_err());
        assert!(parse_config("M=1\nm=2").is_err());
    }

    #[test]
    fn step_counts() {
        let mut p = Params::default();
        p.set("t-final", "0.5");
        p.set("dt", "0.001");
        assert_eq!(p.step_count("t-final", "dt").unwrap(), 500);
        p.set("dt", "0.3");
        assert!(p.step_count("t-final", "dt").is_err());
    }
}
