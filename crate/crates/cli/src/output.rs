//! Atomic output files and their metadata sidecars.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// A file that only appears at its destination once [`commit`](Self::commit)
/// succeeds. Dropping it uncommitted removes the temporary file.
pub struct AtomicFile {
    path: PathBuf,
    writer: BufWriter<NamedTempFile>,
}

impl AtomicFile {
    pub fn create(path: &Path) -> CliResult<Self> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(AtomicFile {
            path: path.to_path_buf(),
            writer: BufWriter::with_capacity(1 << 16, tmp),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<NamedTempFile> {
        &mut self.writer
    }

    pub fn commit(self) -> CliResult<()> {
        let path = self.path;
        let tmp = self
            .writer
            .into_inner()
            .map_err(|e| CliError::io(&path, e.into_error()))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut f = AtomicFile::create(path)?;
    f.writer().write_all(bytes).map_err(|e| CliError::io(path, e))?;
    f.commit()
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `<out>.meta.json` with the resolved configuration and run
/// statistics. Contains nothing time- or host-dependent.
pub fn write_sidecar(out: &Path, command: &str, config: &impl Serialize, stats: serde_json::Value) -> CliResult<()> {
    let config = serde_json::to_value(config).map_err(|e| CliError::runtime(e.to_string()))?;
    let meta = serde_json::json!({
        "tool": "qscan",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "stats": stats,
    });
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(&sidecar_path(out), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_file_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        {
            let mut f = AtomicFile::create(&out).unwrap();
            f.writer().write_all(b"partial").unwrap();
        }
        assert!(!out.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        write_atomic(&out, b"done").unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), b"done");
    }

    #[test]
    fn sidecar_name_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta.json"));
    }
}
