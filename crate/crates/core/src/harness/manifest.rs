//! Output manifests listing the content hash of every written file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn collect(root: &Path, dir: &Path, skip: &[&str], out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
        if skip.iter().any(|s| rel == *s || rel.starts_with(&format!("{s}/"))) {
            continue;
        }
        if path.is_dir() {
            collect(root, &path, skip, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Hashes every file under `dir` except the manifest itself and the
/// `skip` entries (files or directories, relative paths); sorted by path.
pub fn build_manifest(dir: &Path, skip: &[&str]) -> Result<Manifest> {
    let mut skip = skip.to_vec();
    skip.push(MANIFEST_FILE);
    let mut paths = Vec::new();
    collect(dir, dir, &skip, &mut paths)?;
    let mut files = paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(ManifestEntry {
                path: p.strip_prefix(dir).expect("under root").to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Manifest { files })
}

/// Builds the manifest of `dir` and writes it as `manifest.json`.
pub fn write_manifest(dir: &Path, skip: &[&str]) -> Result<Manifest> {
    let manifest = build_manifest(dir, skip)?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}
