//! Result files: a CSV data file and a JSON summary per run, both carrying
//! the resolved configuration verbatim, plus a metadata sidecar with the
//! wall clock and config hash (timestamps stay out of the data files so
//! reruns are byte-identical).

use std::path::{Path, PathBuf};

use radialweb_core::io::{atomic_write, config_hash, format_float, to_json_string};
use serde::Serialize;
use serde_json::json;

pub struct RunWriter {
    dir: PathBuf,
    command: String,
    config_lines: Vec<(String, String)>,
    started: std::time::Instant,
}

impl RunWriter {
    pub fn new(dir: &Path, command: &str, config: &[(String, String)]) -> Self {
        RunWriter {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_lines: config.to_vec(),
            started: std::time::Instant::now(),
        }
    }

    pub fn config_string(&self) -> String {
        self.config_lines
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.config_lines
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }

    /// Write the CSV data file: config comment, header row, then rows of
    /// 17-significant-digit decimals.
    pub fn write_csv(&self, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<PathBuf> {
        let mut text = String::new();
        text.push_str(&format!("# command={} {}\n", self.command, self.config_string()));
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = self.dir.join(format!("{}.csv", self.command));
        atomic_write(&path, text.as_bytes()).map_err(to_io)?;
        Ok(path)
    }

    /// Write the JSON summary: versioned schema, config echo, payload.
    pub fn write_summary<T: Serialize>(&self, payload: &T) -> std::io::Result<PathBuf> {
        let doc = json!({
            "schema": 1,
            "command": self.command,
            "config": self.config_json(),
            "result": serde_json::to_value(payload).map_err(std::io::Error::other)?,
        });
        let text = to_json_string(&doc).map_err(to_io)?;
        let path = self.dir.join(format!("{}.json", self.command));
        atomic_write(&path, text.as_bytes()).map_err(to_io)?;
        Ok(path)
    }

    /// Write the metadata sidecar (the only file carrying timestamps).
    pub fn write_meta(&self, extra: serde_json::Value) -> std::io::Result<PathBuf> {
        let wall = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "schema": 1,
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config_json(),
            "config_hash": config_hash(&format!("{} {}", self.command, self.config_string())),
            "wall_clock_unix": wall,
            "duration_secs": self.started.elapsed().as_secs_f64(),
            "extra": extra,
        });
        let text = to_json_string(&doc).map_err(to_io)?;
        let path = self.dir.join(format!("{}.meta.json", self.command));
        atomic_write(&path, text.as_bytes()).map_err(to_io)?;
        Ok(path)
    }
}

fn to_io(e: radialweb_core::Error) -> std::io::Error {
    match e {
        radialweb_core::Error::Io(io) => io,
        other => std::io::Error::other(other.to_string()),
    }
}
