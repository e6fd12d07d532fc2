use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::args::Cli;

/// Creates and returns the output directory, defaulting to a named folder
/// under the output root.
pub fn out_dir(cli: &Cli, explicit: Option<&Path>, default_name: &str) -> Result<PathBuf> {
    let dir = explicit.map_or_else(|| cli.output_root.join(default_name), Path::to_path_buf);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn file_crc32(path: &Path) -> Result<u32> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(crc32fast::hash(&bytes))
}

pub fn record_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.efrc"))
}
