//! Buffered outputs committed only after a command succeeds.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult, ErrorCode};

pub const LOCK_FILE: &str = ".covplan.lock";

/// Files produced by a command, keyed by name relative to the output
/// directory. Nothing touches the disk until [`OutputSet::commit`].
#[derive(Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    pub fn add_with<F>(&mut self, name: impl Into<String>, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let name = name.into();
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::new(ErrorCode::OutputFailed, format!("{name}: {e}")))?;
        self.files.insert(name, buf);
        Ok(())
    }

    /// Writes every file into `dir` via temp file and rename, while holding
    /// the directory lock.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let failed = |p: &Path, e: std::io::Error| CliError::new(ErrorCode::OutputFailed, e.to_string()).at(p);
        fs::create_dir_all(dir).map_err(|e| failed(dir, e))?;
        let _lock = DirLock::acquire(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, &bytes).map_err(|e| failed(&tmp, e))?;
            fs::rename(&tmp, &target).map_err(|e| failed(&target, e))?;
            written.push(target);
        }
        Ok(written)
    }
}

/// Exclusive claim on an output directory; removed on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::new(
                ErrorCode::OutputLocked,
                "output directory is locked by another run",
            )
            .at(path)),
            Err(e) => Err(CliError::new(ErrorCode::OutputFailed, e.to_string()).at(path)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_all_files_and_releases_lock() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new();
        out.add("a.txt", "alpha");
        out.add("b.txt", "beta");
        let written = out.commit(dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("b.txt")).unwrap(), "beta");
        assert!(!dir.path().join(LOCK_FILE).exists());
    }

    #[test]
    fn held_lock_blocks_commit() {
        let dir = tempfile::tempdir().unwrap();
        let _held = DirLock::acquire(dir.path()).unwrap();
        let mut out = OutputSet::new();
        out.add("a.txt", "alpha");
        let err = out.commit(dir.path()).unwrap_err();
        assert_eq!(err.code, ErrorCode::OutputLocked);
        assert_eq!(err.exit_code, 5);
        assert!(!dir.path().join("a.txt").exists());
    }
}
