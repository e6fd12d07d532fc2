pub mod dataset;
pub mod ensemble;
pub mod eval;
pub mod report;
pub mod train;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use efnet_core::blocks::read_checkpoint;
use efnet_core::data::{read_record_file, SplitTag};
use efnet_core::{Dataset, ModelGraph};

use crate::output::record_path;

/// Loads `<dir>/<split>.efrc` as a normalized dataset.
pub fn load_split(dir: &Path, split: &str) -> Result<Dataset> {
    let tag: SplitTag = split.parse()?;
    let path = record_path(dir, split);
    let records = read_record_file(&path, tag).with_context(|| format!("loading {}", path.display()))?;
    Ok(records.to_dataset()?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelGraph> {
    let file = File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    read_checkpoint(BufReader::new(file)).with_context(|| format!("reading checkpoint {}", path.display()))
}
