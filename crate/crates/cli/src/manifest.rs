use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct ManifestDoc<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// Command-line arguments after the program name.
    arguments: Vec<String>,
    config: &'a BTreeMap<String, String>,
    synthetic: bool,
    inputs: &'a [FileRecord],
    outputs: &'a [FileRecord],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Tracks the files a command reads and writes, and writes the run
/// manifest plus a `config.txt` that replays the run.
#[derive(Debug)]
pub struct Run {
    command: &'static str,
    out_dir: PathBuf,
    synthetic: bool,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

impl Run {
    pub fn start(command: &'static str, out_dir: &Path, synthetic: bool) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
            path: out_dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            command,
            out_dir: out_dir.to_path_buf(),
            synthetic,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Reads an input file and records its hash.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_bytes(path)?;
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn input_text(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.input(path)?)
            .map_err(|_| CliError::runtime(format!("{}: not UTF-8 text", path.display())))
    }

    /// Writes `name` inside the output directory and records its hash.
    pub fn output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.outputs.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn finish(mut self, config: &RunConfig) -> Result<()> {
        self.output("config.txt", config.to_text().as_bytes())?;
        let doc = ManifestDoc {
            tool: "hipgest",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            arguments: std::env::args().skip(1).collect(),
            config: config.values(),
            synthetic: self.synthetic,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut json = serde_json::to_string_pretty(&doc).map_err(CliError::runtime)?;
        json.push('\n');
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, json).map_err(|source| CliError::Io { path, source })
    }
}
