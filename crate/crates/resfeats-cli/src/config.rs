//! Flat key=value config file support. A `--config FILE` anywhere on
//! the command line loads defaults for the invoked subcommand; flags
//! given explicitly always win. Keys may be qualified with the
//! subcommand path ("svm.train.c=2") to scope them; unqualified keys
//! apply wherever the flag name exists.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

fn find_config_path(args: &[String]) -> Option<PathBuf> {
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            return args.get(i + 1).map(PathBuf::from);
        }
        if let Some(v) = args[i].strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
        i += 1;
    }
    None
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", ln + 1);
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// The subcommand path named on the command line, e.g. ["svm", "train"].
fn subcommand_path<'a>(args: &[String], root: &'a clap::Command) -> (Vec<String>, &'a clap::Command) {
    let mut path = Vec::new();
    let mut cur = root;
    let mut i = 1;
    while i < args.len() {
        let tok = &args[i];
        if tok == "--config" {
            i += 2;
            continue;
        }
        if tok.starts_with("--config=") {
            i += 1;
            continue;
        }
        if tok.starts_with('-') {
            break;
        }
        match cur.get_subcommands().find(|s| s.get_name() == tok.as_str()) {
            Some(sc) => {
                path.push(tok.clone());
                cur = sc;
                if cur.get_subcommands().next().is_none() {
                    break;
                }
                i += 1;
            }
            None => break,
        }
    }
    (path, cur)
}

/// Injects config-file values as trailing `--key=value` tokens for every
/// key the invoked subcommand accepts and the user did not pass.
pub fn apply_config_file(mut args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = find_config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let pairs = parse_pairs(&text)?;
    let root = Cli::command();
    let (sub_path, sub) = subcommand_path(&args, &root);

    let accepted: Vec<(String, bool)> = sub
        .get_arguments()
        .filter_map(|a| {
            a.get_long().map(|l| {
                let is_switch = matches!(
                    a.get_action(),
                    clap::ArgAction::SetTrue | clap::ArgAction::SetFalse
                );
                (l.to_string(), is_switch)
            })
        })
        .collect();

    for (key, value) in pairs {
        let segments: Vec<&str> = key.split('.').collect();
        let (quals, name) = segments.split_at(segments.len() - 1);
        if !quals.is_empty()
            && (quals.len() > sub_path.len()
                || quals.iter().zip(&sub_path).any(|(q, s)| q != s))
        {
            continue;
        }
        let Some((_, is_switch)) = accepted.iter().find(|(n, _)| n == name[0]) else {
            continue;
        };
        let long = format!("--{}", name[0]);
        let assigned = format!("{long}=");
        if args.iter().any(|t| *t == long || t.starts_with(&assigned)) {
            continue;
        }
        if *is_switch {
            match value.parse::<bool>() {
                Ok(true) => args.push(long),
                Ok(false) => {}
                Err(_) => bail!("config key {key:?} expects true or false, got {value:?}"),
            }
        } else {
            args.push(format!("{long}={value}"));
        }
    }
    Ok(args)
}
