//! Output directory bookkeeping: file writes and the checksummed manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Written last by every command; lists every other file in the directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: String,
    pub stages: Vec<StageTime>,
    pub files: Vec<FileEntry>,
}

pub struct OutputDir {
    root: PathBuf,
    stages: Vec<StageTime>,
    quiet: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutputDir {
    pub fn create(root: &Path, quiet: bool) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            stages: Vec::new(),
            quiet,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> io::Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Runs `f`, recording its wall time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        if !self.quiet {
            eprintln!("[{stage}] running");
        }
        let t = Instant::now();
        let out = f();
        let seconds = t.elapsed().as_secs_f64();
        if !self.quiet {
            eprintln!("[{stage}] done in {seconds:.2} s");
        }
        self.stages.push(StageTime {
            stage: stage.into(),
            seconds,
        });
        out
    }

    pub fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Checksums every regular file except the manifest and writes the manifest.
    pub fn finish(self, command: &str, seed: u64, config: &str) -> io::Result<RunManifest> {
        let mut files = Vec::new();
        let mut names: Vec<_> = fs::read_dir(&self.root)?
            .collect::<io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        for name in names {
            let bytes = fs::read(self.root.join(&name))?;
            files.push(FileEntry {
                path: name,
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: config.into(),
            stages: self.stages,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}
