//! TOML config files whose keys are long flag names.
//!
//! Arrays become comma-separated flag values. Keys that belong to a
//! different subcommand are ignored, unknown keys are rejected, and a flag
//! given on the command line always beats the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

/// Flattens a TOML table of scalars and arrays into `(long-flag, value)`
/// pairs, with arrays joined by commas.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
    table
        .into_iter()
        .map(|(key, value)| {
            let value = match value {
                toml::Value::Array(items) => items
                    .into_iter()
                    .map(|v| scalar(&key, v))
                    .collect::<Result<Vec<_>, _>>()?
                    .join(","),
                v => scalar(&key, v)?,
            };
            Ok((key.replace('_', "-"), value))
        })
        .collect()
}

fn scalar(key: &str, value: toml::Value) -> Result<String, String> {
    match value {
        toml::Value::String(s) => Ok(s),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(format!("{key}: unsupported value {other}")),
    }
}

/// `argv` with the config entries not already given on the command line
/// appended as `--key=value`.
pub fn merge(
    root: &Command,
    matches: &ArgMatches,
    argv: &[OsString],
    path: &Path,
) -> Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let entries = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let (sub_name, sub_matches) = matches
        .subcommand()
        .ok_or_else(|| "a subcommand is required".to_string())?;
    let sub = root
        .find_subcommand(sub_name)
        .ok_or_else(|| format!("unknown subcommand {sub_name}"))?;

    let mut out = argv.to_vec();
    for (key, value) in entries {
        if key == "config" {
            return Err(format!("{}: a config file cannot name another config", path.display()));
        }
        let (arg, m) = match find(root, &key) {
            Some(a) => (a, matches),
            None => match find(sub, &key) {
                Some(a) => (a, sub_matches),
                None if root.get_subcommands().any(|c| find(c, &key).is_some()) => continue,
                None => return Err(format!("{}: unknown key {key:?}", path.display())),
            },
        };
        if m.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(format!("{}: {key} expects true or false, got {other:?}", path.display())),
            },
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

fn find<'a>(cmd: &'a Command, long: &str) -> Option<&'a clap::Arg> {
    cmd.get_arguments().find(|a| a.get_long() == Some(long))
}

pub fn config_path(matches: &ArgMatches) -> Option<PathBuf> {
    matches.get_one::<PathBuf>("config").cloned()
}
