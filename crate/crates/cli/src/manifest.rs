//! `manifest.txt`: one line `sha256  path  bytes` per produced file, sorted by path.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn files_under(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            files_under(root, &path, out)?;
        } else if path != root.join(MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Every file below `root` except the manifest itself.
pub fn scan(root: &Path) -> io::Result<Vec<ManifestEntry>> {
    let mut files = Vec::new();
    files_under(root, root, &mut files)?;
    let mut entries = files
        .iter()
        .map(|path| {
            let data = fs::read(path)?;
            Ok(ManifestEntry {
                path: relative(root, path),
                sha256: sha256_hex(&data),
                bytes: data.len() as u64,
            })
        })
        .collect::<io::Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

pub fn write_manifest(root: &Path, entries: &[ManifestEntry]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(root.join(MANIFEST_FILE))?);
    for e in entries {
        writeln!(out, "{}  {}  {}", e.sha256, e.path, e.bytes)?;
    }
    out.flush()
}

pub fn read_manifest(path: &Path) -> io::Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(|line| {
            let parts: Vec<&str> = line.split("  ").collect();
            match parts.as_slice() {
                [sha, path, bytes] => Ok(ManifestEntry {
                    path: path.to_string(),
                    sha256: sha.to_string(),
                    bytes: bytes
                        .parse()
                        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{line}: {e}")))?,
                }),
                _ => Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("malformed manifest line {line:?}"),
                )),
            }
        })
        .collect()
}
