//! Input loading with path-bearing diagnostics and all-or-nothing output.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use multibias::vectors::load_embeddings;
use multibias::EmbeddingSet;
use tempfile::NamedTempFile;

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?;
    Ok(BufReader::new(file))
}

pub fn read_vectors(path: &Path) -> Result<EmbeddingSet> {
    let loaded = load_embeddings(open(path)?, None)
        .with_context(|| format!("cannot read vectors from `{}`", path.display()))?;
    log::info!(
        "loaded {} vectors of dimension {} from `{}`",
        loaded.set.len(),
        loaded.set.dim(),
        path.display()
    );
    Ok(loaded.set)
}

/// Output files staged next to their targets and renamed into place only
/// once every one of them has been written.
#[derive(Default)]
pub struct Outputs {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Outputs {
    pub fn add(&mut self, target: &Path, bytes: &[u8]) -> Result<()> {
        let dir = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("cannot create a file next to `{}`", target.display()))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.flush())
            .with_context(|| format!("cannot write `{}`", target.display()))?;
        self.staged.push((tmp, target.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        for (tmp, target) in self.staged {
            tmp.persist(&target)
                .with_context(|| format!("cannot write `{}`", target.display()))?;
            log::info!("wrote `{}`", target.display());
        }
        Ok(())
    }
}

/// Pretty JSON with a trailing newline.
pub fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
