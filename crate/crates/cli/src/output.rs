//! Staged artifact writing: files are collected in a staging directory and
//! moved into the output directory only when the whole command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_at, CliResult};

const STAGING: &str = ".nmq-staging";

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    created_out: bool,
    files: Vec<String>,
    finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub shots: u64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Staging {
    pub fn new(out: &Path) -> CliResult<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out).map_err(io_at(out))?;
        let dir = out.join(STAGING);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_at(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        Ok(Self { out: out.to_path_buf(), dir, created_out, files: Vec::new(), finished: false })
    }

    /// Writes `bytes` to the staged file `rel` (a relative path with '/' separators).
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_at(parent))?;
        }
        fs::write(&path, bytes).map_err(io_at(&path))?;
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(())
    }

    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> nmq_core::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Moves staged files into place and writes `manifest.json` listing them.
    pub fn commit(mut self, mut manifest: Manifest) -> CliResult<Manifest> {
        self.files.sort();
        let mut entries = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let src = self.dir.join(rel);
            let bytes = fs::read(&src).map_err(io_at(&src))?;
            entries.push(FileEntry { path: rel.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
            let dst = self.out.join(rel);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(io_at(parent))?;
            }
            fs::rename(&src, &dst).map_err(io_at(&dst))?;
        }
        manifest.files = entries;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.out.join("manifest.json");
        fs::write(&path, bytes).map_err(io_at(&path))?;
        fs::remove_dir_all(&self.dir).map_err(io_at(&self.dir))?;
        self.finished = true;
        Ok(manifest)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        let _ = fs::remove_dir_all(&self.dir);
        if self.created_out {
            // Only removes the directory if nothing else was put there.
            let _ = fs::remove_dir(&self.out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            tool: "nmq".into(),
            version: "0".into(),
            command: "test".into(),
            config_sha256: String::new(),
            seed: None,
            shots: 0,
            files: Vec::new(),
        }
    }

    #[test]
    fn commit_moves_files_and_hashes_them() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("o");
        let mut s = Staging::new(&out).unwrap();
        s.write("b.txt", b"abc").unwrap();
        s.write("sub/a.txt", b"").unwrap();
        let m = s.commit(manifest()).unwrap();
        assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["b.txt", "sub/a.txt"]);
        assert_eq!(m.files[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.files[0].bytes, 3);
        assert!(out.join("sub/a.txt").is_file());
        assert!(out.join("manifest.json").is_file());
        assert!(!out.join(STAGING).exists());
    }

    #[test]
    fn drop_without_commit_cleans_up() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("o");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("x.csv", b"1").unwrap();
        }
        assert!(!out.exists());

        fs::create_dir_all(&out).unwrap();
        fs::write(out.join("keep"), b"").unwrap();
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("x.csv", b"1").unwrap();
        }
        assert!(out.join("keep").exists());
        assert!(!out.join("x.csv").exists());
        assert!(!out.join(STAGING).exists());
    }
}
