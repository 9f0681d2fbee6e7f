//! key=value config files. Flags override config entries; config entries
//! override built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        ConfigMap { entries: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("{}:{}: expected key=value", path.display(), lineno + 1));
            };
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigMap { entries })
    }

    /// Flag value if present, else config entry, else default.
    pub fn resolve<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str, default: T) -> Result<T, String>
    where
        <T as FromStr>::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v.clone());
        }
        match self.entries.get(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| format!("config key {key}: {e}")),
            None => Ok(default),
        }
    }

    pub fn resolve_opt<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>, String>
    where
        <T as FromStr>::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.entries.get(key) {
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| format!("config key {key}: {e}")),
            None => Ok(None),
        }
    }
}
