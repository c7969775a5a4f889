use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Run metadata written at the top of every CSV as `#` lines.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub config_json: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new<T: Serialize>(
        command: &'static str,
        config: &T,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let config_json =
            serde_json::to_string(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self {
            command,
            config_json,
            seed,
        })
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.config_json.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn header(&self) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# viscwave {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(h, "# command: {}", self.command);
        let _ = writeln!(h, "# config_sha256: {}", self.hash());
        if let Some(seed) = self.seed {
            let _ = writeln!(h, "# seed: {seed}");
        }
        let _ = writeln!(h, "# config: {}", self.config_json);
        h
    }
}

/// CSV text under construction.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(provenance: &Provenance, columns: &[&str]) -> Self {
        let mut text = provenance.header();
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_stable() {
        let p = Provenance::new("x", &serde_json::json!({"a": 1}), Some(4)).unwrap();
        let q = Provenance::new("x", &serde_json::json!({"a": 1}), Some(4)).unwrap();
        assert_eq!(p.header(), q.header());
        assert_eq!(p.hash().len(), 64);
        assert!(p.header().lines().all(|l| l.starts_with('#')));
    }
}
