//! `manifest.json`: digests of the artifacts a run wrote.
//!
//! Only the files a run wrote are listed, by relative path and sorted, and no
//! timestamps are recorded, so two runs of the same config give byte-identical
//! manifests wherever they are written.

use std::fs;
use std::io;
use std::path::Path;

use qemlab::io::sha256_hex;
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    /// Digests `files` (relative to `dir`, `/`-separated).
    pub fn collect(dir: &Path, command: &str, config_digest: &str, files: &[String]) -> io::Result<Manifest> {
        let mut names: Vec<&String> = files.iter().filter(|f| f.as_str() != MANIFEST_NAME).collect();
        names.sort();
        names.dedup();
        let mut files = Vec::with_capacity(names.len());
        for name in names {
            let bytes = fs::read(dir.join(name))?;
            files.push(FileEntry {
                path: name.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Manifest {
            command: command.into(),
            config_digest: config_digest.into(),
            files,
        })
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_NAME), text + "\n")
    }
}
