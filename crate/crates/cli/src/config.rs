//! `--config` files: flat `key = value` lines whose keys are long flag names.
//! File values are spliced in right after the subcommand, so any flag given
//! on the command line comes later and wins.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub const SUBCOMMANDS: [&str; 5] = ["simulate", "sweep", "bounds", "gen-instance", "prepare-movielens"];

/// Converts file contents into flags. `true`/`false` values become a bare
/// switch or nothing.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", origin.display(), i + 1);
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            bail!("{}:{}: empty key", origin.display(), i + 1);
        }
        if key == "config" {
            bail!("{}:{}: config files cannot include other config files", origin.display(), i + 1);
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => args.push(format!("--{key}={value}")),
        }
    }
    Ok(args)
}

/// Removes `--config <path>` from `argv` and splices the file's flags in after
/// the subcommand. Flags before the subcommand move after the file's flags.
pub fn expand_argv(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    let bin = it.next();
    while let Some(arg) = it.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        if arg == "--config" {
            config = Some(it.next().context("--config needs a path")?);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let mut out: Vec<String> = bin.into_iter().collect();
    let Some(path) = config else {
        out.extend(rest);
        return Ok(out);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let from_file = parse_config(&text, Path::new(&path))?;
    let Some(pos) = rest.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        bail!("--config needs a subcommand");
    };
    let sub = rest.remove(pos);
    out.push(sub);
    out.extend(from_file);
    out.extend(rest);
    Ok(out)
}
