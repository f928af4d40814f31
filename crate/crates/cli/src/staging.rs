//! Outputs are written into a hidden sibling directory and moved into place
//! only after the command succeeds; on failure the staging directory is
//! dropped with everything in it.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use crate::error::CliResult;

pub struct Staging {
    dir: TempDir,
    target: PathBuf,
    files: Vec<String>,
}

impl Staging {
    pub fn new(target: &Path) -> CliResult<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let dir = tempfile::Builder::new().prefix(".iolrt-staging-").tempdir_in(&parent)?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn create(&mut self, relative: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.path().join(relative);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        self.files.push(relative.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    /// Relative paths written so far, sorted.
    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.clone();
        f.sort();
        f.dedup();
        f
    }

    /// Move the staged outputs into the target directory, replacing entries
    /// of the same name.
    pub fn commit(self) -> CliResult<PathBuf> {
        let staged = self.dir.path().to_path_buf();
        if !self.target.exists() {
            let kept = self.dir.keep();
            fs::rename(&kept, &self.target)?;
            return Ok(self.target);
        }
        let mut entries: Vec<_> = fs::read_dir(&staged)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let dest = self.target.join(entry.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest)?;
            }
            fs::rename(entry.path(), &dest)?;
        }
        Ok(self.target)
    }
}
