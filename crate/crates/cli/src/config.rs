use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Effective key-value settings of one command: defaults, then the config
/// file, then `--set` overrides, then `--seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn new(defaults: BTreeMap<String, String>) -> Self {
        Self { values: defaults }
    }

    pub fn load(
        defaults: BTreeMap<String, String>,
        file: Option<&Path>,
        sets: &[String],
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = Self::new(defaults);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            for (k, v) in parse_pairs(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set `{s}`: expected key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = seed {
            cfg.set("seed", &seed.to_string())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::usage(format!("unknown config key `{key}`"))),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key `{key}` has no default"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key);
        raw.parse()
            .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{raw}`")))
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// The entries whose keys are listed, for handing to a library config.
    pub fn subset(&self, keys: &[&str]) -> BTreeMap<String, String> {
        keys.iter()
            .filter_map(|k| self.values.get(*k).map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    /// Config-file text that reproduces this configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Builds a defaults map from string pairs.
pub fn defaults(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_unknown_keys() {
        let dir = std::env::temp_dir().join(format!("hipgest-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.conf");
        std::fs::write(&file, "# comment\nk = 3 # trailing\n\nseed=4\n").unwrap();
        let base = defaults(&[("k", "5"), ("seed", "0"), ("sigma", "3.0")]);
        let cfg = RunConfig::load(base.clone(), Some(&file), &["sigma=2.5".into()], None).unwrap();
        assert_eq!(cfg.get::<usize>("k").unwrap(), 3);
        assert_eq!(cfg.get::<u64>("seed").unwrap(), 4);
        assert_eq!(cfg.get::<f64>("sigma").unwrap(), 2.5);
        let cfg = RunConfig::load(base.clone(), Some(&file), &[], Some(9)).unwrap();
        assert_eq!(cfg.str("seed"), "9");

        let err = RunConfig::load(base.clone(), None, &["bogus=1".into()], None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::load(base.clone(), None, &["novalue".into()], None).is_err());
        assert!(parse_pairs("just words").is_err());
        let again = RunConfig::load(base, None, &[], None).unwrap();
        let reparsed = parse_pairs(&again.to_text()).unwrap();
        assert_eq!(reparsed.len(), 3);
        std::fs::remove_dir_all(dir).ok();
    }
}
