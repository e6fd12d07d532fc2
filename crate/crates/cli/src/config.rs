//! `--config FILE` expansion and effective-config echo.
//!
//! Config entries are spliced in right after the subcommand name, ahead of
//! the user's own flags, so a flag given on the command line overrides the
//! file. List-valued flags from the file are dropped when the command line
//! supplies that flag at all.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, CommandFactory};
use serde::Serialize;
use serde_json::Value;

use crate::args::Cli;

/// Parses `key=value` lines; `#` starts a comment, keys may use `_` or `-`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then_some((i + 1, line))
        })
        .map(|(n, line)| {
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("config line {n}: expected key=value, got `{line}`"))?;
            Ok((k.trim().replace('_', "-"), v.trim().to_string()))
        })
        .collect()
}

pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let Some(sub_pos) = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| root.find_subcommand(s).is_some()))
    else {
        return Ok(argv);
    };
    let sub = root
        .find_subcommand(argv[sub_pos].to_str().unwrap_or_default())
        .expect("found above");
    let user: Vec<String> = argv[sub_pos + 1..]
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(path) = config_path(&user) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let user_gave = |long: &str| {
        let flag = format!("--{long}");
        user.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };

    let mut injected = Vec::new();
    for (key, value) in parse_config(&text)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!("config {path}: unknown key `{key}` for `{}`", sub.get_name());
        };
        if key == "config" {
            bail!("config {path}: nested config files are not supported");
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                _ => bail!("config {path}: `{key}` must be true or false"),
            },
            ArgAction::Append if user_gave(&key) => {}
            _ => injected.push(format!("--{key}={value}")),
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(argv[sub_pos + 1..].iter().cloned());
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    path
}

/// Settings as `key=value` lines, readable back through `--config`.
pub fn render_effective<T: Serialize>(args: &T) -> Result<String> {
    let Value::Object(map) = serde_json::to_value(args)? else {
        bail!("arguments did not serialize to a map");
    };
    let mut out = String::new();
    for (key, value) in map {
        let key = key.replace('_', "-");
        let values = match value {
            Value::Null => continue,
            Value::Array(items) => items,
            other => vec![other],
        };
        for v in values {
            let text = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("{key}={text}\n"));
        }
    }
    Ok(out)
}

pub fn write_effective<T: Serialize>(dir: &Path, args: &T) -> Result<()> {
    let path = dir.join("config.txt");
    fs::write(&path, render_effective(args)?).with_context(|| format!("writing {}", path.display()))
}
