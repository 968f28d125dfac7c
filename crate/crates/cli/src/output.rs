//! Run directories: files are written with a `.partial` suffix and renamed
//! only when the manifest is committed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const PARTIAL_SUFFIX: &str = ".partial";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: serde_json::Value,
    pub version: String,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Formats a value with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct RunDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        // A stale manifest would vouch for files about to be replaced.
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| CliError::io(&manifest, e))?;
        }
        Ok(RunDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn partial(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}{PARTIAL_SUFFIX}"))
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.partial(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Numeric CSV with a header row.
    pub fn write_csv<'a, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    text.push(',');
                }
                let _ = write!(text, "{}", num(*x));
            }
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Rename every partial file, hash it and write the manifest last.
    pub fn commit(self, config: serde_json::Value, wall_time_s: f64) -> Result<RunManifest, CliError> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let partial = self.partial(name);
            let target = self.dir.join(name);
            let bytes = fs::read(&partial).map_err(|e| CliError::io(&partial, e))?;
            fs::rename(&partial, &target).map_err(|e| CliError::io(&target, e))?;
            files.push(FileEntry { name: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        let manifest =
            RunManifest { config, version: env!("CARGO_PKG_VERSION").to_string(), wall_time_s, files };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        let partial = self.partial(MANIFEST);
        fs::write(&partial, text + "\n").map_err(|e| CliError::io(&partial, e))?;
        let target = self.dir.join(MANIFEST);
        fs::rename(&partial, &target).map_err(|e| CliError::io(&target, e))?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Header and rows of a numeric CSV written by [`RunDir::write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Io(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Io(format!("{}:{}: {e}", path.display(), i + 2)))?;
        if row.len() != header.len() {
            return Err(CliError::Io(format!("{}:{}: wrong column count", path.display(), i + 2)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 1e300, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
