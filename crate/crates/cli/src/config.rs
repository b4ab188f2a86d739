//! `key=value` settings merged from defaults, an optional config file and
//! command-line flags, in increasing order of precedence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use crate::CliError;

/// Keys holding angles; `--degrees` converts exactly these.
const ANGLE_KEYS: [&str; 7] = [
    "theta",
    "omega",
    "machine_theta",
    "machine_omega",
    "fix_theta",
    "fix_omega",
    "fixed_omega",
];

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key=value",
                n + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    degrees: bool,
}

impl Settings {
    /// Rejects any key outside `allowed`, then overlays `flags` on `file`.
    pub fn merge(
        allowed: &[&str],
        file: BTreeMap<String, String>,
        flags: Vec<(&'static str, Option<String>)>,
        degrees: bool,
    ) -> Result<Self, CliError> {
        if let Some(bad) = file.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key `{bad}`")));
        }
        let mut values = file;
        for (key, value) in flags {
            debug_assert!(
                allowed.contains(&key),
                "flag {key} missing from allowed keys"
            );
            if let Some(v) = value {
                values.insert(key.to_string(), v);
            }
        }
        let degrees = match values.remove("degrees") {
            Some(v) => parse_bool("degrees", &v)? || degrees,
            None => degrees,
        };
        Ok(Self { values, degrees })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Angle in radians, converting from degrees when requested.
    pub fn angle(&self, key: &str) -> Result<Option<f64>, CliError> {
        debug_assert!(ANGLE_KEYS.contains(&key));
        let v: Option<f64> = self.parsed(key)?;
        Ok(v.map(|a| if self.degrees { a * PI / 180.0 } else { a }))
    }

    /// Comma-separated reals; an empty value is an empty list.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| CliError::Usage(format!("invalid value `{s}` in `{key}`")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value `{v}` for `{key}`"))),
    }
}
