use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

/// Every key any command understands.
pub const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "nbar",
    "temperature",
    "omega",
    "g",
    "gmax_nbar",
    "tau",
    "chi",
    "phi_lo",
    "theta",
    "n_max",
    "seed",
    "seeds",
    "samples",
    "g_min",
    "g_max",
    "g_points",
    "tau_min",
    "tau_max",
    "tau_points",
    "nbar_min",
    "nbar_max",
    "nbar_points",
    "nbar_values",
    "chi_points",
    "phi_points",
    "phi_scan_points",
    "quadrature_points",
    "wigner_points",
    "wigner_half_width",
    "prior_min",
    "prior_max",
    "prior_points",
    "alpha_values",
    "g_values",
    "tau_values",
];

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// A number, or a keyword asking the tool to work the value out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Value(f64),
    Keyword,
}

/// Merged configuration (file, then flag overrides) with a log of every
/// value the command resolved, defaults included.
pub struct Config {
    table: Table,
    resolved: RefCell<Vec<(String, String)>>,
}

pub fn format_f64(x: f64) -> String {
    // Shortest round-trip form keeps the CSV deterministic and lossless.
    format!("{x:?}")
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("\"{s}\""),
        other => other.to_string(),
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| ConfigError(format!("invalid config {}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        let cfg = Self {
            table,
            resolved: RefCell::new(Vec::new()),
        };
        cfg.check_keys()?;
        Ok(cfg)
    }

    fn check_keys(&self) -> Result<(), ConfigError> {
        let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
        for k in self.table.keys() {
            if !known.contains(k.as_str()) {
                return Err(ConfigError(format!("unknown config key `{k}`")));
            }
        }
        Ok(())
    }

    /// Flag override; `raw` is parsed as a TOML value, falling back to a string.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError(format!("unknown config key `{key}`")));
        }
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.table.insert(key.to_string(), value);
        Ok(())
    }

    pub fn record(&self, key: &str, value: String) {
        let mut r = self.resolved.borrow_mut();
        if let Some(slot) = r.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value;
        } else {
            r.push((key.to_string(), value));
        }
    }

    pub fn resolved(&self) -> Vec<(String, String)> {
        self.resolved.borrow().clone()
    }

    /// Keys present in the input that the command never looked at.
    pub fn unused(&self) -> Vec<String> {
        let r = self.resolved.borrow();
        self.table
            .keys()
            .filter(|k| !r.iter().any(|(rk, _)| rk == *k))
            .cloned()
            .collect()
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64, ConfigError> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(ConfigError(format!("`{key}` must be a number, got {}", describe(other)))),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => {
                let x = self.number(key, v)?;
                if !x.is_finite() {
                    return Err(ConfigError(format!("`{key}` must be finite")));
                }
                self.record(key, format_f64(x));
                Ok(Some(x))
            }
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(match self.opt_f64(key)? {
            Some(x) => x,
            None => {
                self.record(key, format_f64(default));
                default
            }
        })
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = match self.table.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(other) => {
                return Err(ConfigError(format!(
                    "`{key}` must be a non-negative integer, got {}",
                    describe(other)
                )))
            }
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        if self.table.contains_key(key) {
            Ok(Some(self.usize(key, 0)?))
        } else {
            Ok(None)
        }
    }

    /// A number or `keyword`; absent means `default`.
    pub fn choice(&self, key: &str, keyword: &str, default: Choice) -> Result<Choice, ConfigError> {
        let c = match self.table.get(key) {
            None => default,
            Some(Value::String(s)) if s == keyword => Choice::Keyword,
            Some(v @ (Value::Float(_) | Value::Integer(_))) => Choice::Value(self.number(key, v)?),
            Some(other) => {
                return Err(ConfigError(format!(
                    "`{key}` must be a number or \"{keyword}\", got {}",
                    describe(other)
                )))
            }
        };
        if let Choice::Value(x) = c {
            if !x.is_finite() {
                return Err(ConfigError(format!("`{key}` must be finite")));
            }
        }
        Ok(c)
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let v = match self.table.get(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|x| self.number(key, x))
                .collect::<Result<Vec<_>, _>>()?,
            Some(other) => {
                return Err(ConfigError(format!("`{key}` must be an array of numbers, got {}", describe(other))))
            }
        };
        if v.is_empty() {
            return Err(ConfigError(format!("`{key}` must not be empty")));
        }
        let shown: Vec<String> = v.iter().map(|x| format_f64(*x)).collect();
        self.record(key, format!("[{}]", shown.join(", ")));
        Ok(v)
    }
}
