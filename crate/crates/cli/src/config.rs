//! `--config` files and run manifests.
//!
//! A config file is TOML with top-level keys named like the long flags
//! (`response = "Y"`, `factors = ["A", "B"]`, `replications = 50`). Values
//! are spliced into the argument list ahead of the command-line flags, and
//! any key whose flag is given on the command line is skipped, so flags
//! always win.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

const SHORT_FLAGS: [(&str, &str); 2] = [("-i", "input"), ("-o", "output")];

/// Returns the argument list with config-file values inserted after the
/// subcommand name.
pub fn merge_config_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config file {path}"))?;
    let Some(sub_pos) = subcommand_position(&args) else {
        return Ok(args);
    };

    let mut injected = Vec::new();
    for (key, value) in &table {
        let flag = key.replace('_', "-");
        if flag == "config" || given_on_command_line(&args, &flag) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => injected.push(format!("--{flag}")),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                injected.push(format!("--{flag}={}", parts.join(",")));
            }
            other => injected.push(format!("--{flag}={}", scalar(other)?)),
        }
    }
    let mut out = args[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_pos + 1..]);
    Ok(out)
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("unsupported config value {other}"),
    })
}

/// First positional argument, skipping the values of `--config` and `--manifest`.
fn subcommand_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" || a == "--manifest" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn given_on_command_line(args: &[String], flag: &str) -> bool {
    let long = format!("--{flag}");
    let short = SHORT_FLAGS.iter().find(|(_, l)| *l == flag).map(|(s, _)| *s);
    args.iter().any(|a| {
        a == &long || a.starts_with(&format!("{long}=")) || short.is_some_and(|s| a.starts_with(s) && !a.starts_with("--"))
    })
}

/// Writes `key = value` lines: tool version, subcommand, seed, and the full
/// effective argument list.
pub fn write_manifest(path: &Path, subcommand: &str, seed: Option<u64>, args: &[String]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "tool = {}", env!("CARGO_PKG_NAME"))?;
    writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(text, "subcommand = {subcommand}")?;
    if let Some(seed) = seed {
        writeln!(text, "seed = {seed}")?;
    }
    writeln!(text, "args = {}", args.get(1..).unwrap_or_default().join(" "))?;
    std::fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
}
