//! Output directory bookkeeping: files, checksums, stage timings, error.json.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const ERROR: &str = "error.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: &'a str,
    pub wall_seconds: f64,
    pub stages: &'a [StageTiming],
    pub files: &'a [FileEntry],
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub command: &'a str,
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
}

/// Collects the artifacts of one command in `root`.
pub struct OutDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    stages: Vec<StageTiming>,
    started: Instant,
    stage_started: Instant,
}

impl OutDir {
    /// Creates `root` and removes a stale manifest or error report.
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        for name in [MANIFEST, ERROR] {
            match fs::remove_file(root.join(name)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        let now = Instant::now();
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
            started: now,
            stage_started: now,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Ends the current stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: name.into(),
            seconds: (now - self.stage_started).as_secs_f64(),
        });
        self.stage_started = now;
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(&path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        self.record(rel, bytes);
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, rel: &str, value: &S) -> io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    /// Registers a file written by someone else.
    pub fn register(&mut self, rel: &str) -> io::Result<()> {
        let bytes = fs::read(self.root.join(rel))?;
        self.record(rel, &bytes);
        Ok(())
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.into(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    /// Writes manifest.json after checking every listed file against its checksum.
    pub fn finish(mut self, command: &str, config_hash: &str) -> io::Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        for f in &self.files {
            let bytes = fs::read(self.root.join(&f.path))?;
            if hex::encode(Sha256::digest(&bytes)) != f.sha256 {
                return Err(io::Error::other(format!(
                    "{} changed after it was written",
                    f.path
                )));
            }
        }
        let manifest = RunManifest {
            tool: "abwave",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            stages: &self.stages,
            files: &self.files,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
        text.push(b'\n');
        fs::write(self.root.join(MANIFEST), text)
    }
}

/// Best-effort error.json; the process exits nonzero either way.
pub fn write_error(root: &Path, report: &ErrorReport<'_>) {
    let write = || -> io::Result<()> {
        fs::create_dir_all(root)?;
        let mut text = serde_json::to_vec_pretty(report).map_err(io::Error::other)?;
        text.push(b'\n');
        fs::write(root.join(ERROR), text)
    };
    if let Err(e) = write() {
        eprintln!("could not write {}: {e}", root.join(ERROR).display());
    }
}
