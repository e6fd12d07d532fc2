use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use efnet_core::blocks::BlockKind;
use efnet_core::ensemble::{EnsembleModel, FitConfig};
use efnet_core::optim::AdamConfig;

use super::{load_checkpoint, load_split};
use crate::args::{Cli, EnsembleArgs};
use crate::config::write_effective;
use crate::output::{out_dir, write};

/// Splits `NAME=PATH`; a bare path is named after its architecture.
fn parse_member(spec: &str) -> (Option<String>, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (Some(name.to_string()), PathBuf::from(path)),
        _ => (None, PathBuf::from(spec)),
    }
}

fn default_name(kind: BlockKind, taken: &[String]) -> String {
    let base = kind.network_name().to_string();
    if !taken.contains(&base) {
        return base;
    }
    (2..)
        .map(|i| format!("{base}-{i}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

pub fn run(cli: &Cli, args: &EnsembleArgs) -> Result<()> {
    let dir = out_dir(cli, args.out.as_deref(), "ensemble")?;
    write_effective(&dir, args)?;

    let mut names = Vec::new();
    let mut models = Vec::new();
    let mut paths = Vec::new();
    for spec in &args.members {
        let (name, path) = parse_member(spec);
        let model = load_checkpoint(&path)?;
        let name = name.unwrap_or_else(|| default_name(model.config().arch, &names));
        names.push(name.clone());
        models.push((name, model));
        paths.push(fs::canonicalize(&path).with_context(|| format!("resolving {}", path.display()))?);
    }
    let mut ensemble = EnsembleModel::new(models)?;
    let data = load_split(&args.data, &args.split)?;
    let config = FitConfig {
        adam: AdamConfig {
            learning_rate: args.lr,
            ..AdamConfig::default()
        },
        steps: args.steps,
    };
    let outcome = ensemble.fit(&data, &config)?;

    write(&dir.join("manifest"), ensemble.manifest(&paths)?.to_text())?;
    let table = ensemble.report_weights();
    write(&dir.join("weights.txt"), &table)?;
    let history = outcome.loss_history;
    let first = history.first().copied().unwrap_or(f64::NAN);
    let last = history.last().copied().unwrap_or(f64::NAN);
    println!("{} loss: {first:.5} -> {last:.5} over {} steps", args.split, args.steps);
    print!("{table}");
    Ok(())
}
