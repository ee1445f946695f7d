mod args;
mod commands;
mod error;
mod manifest;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use error::CliError;

/// Turns `key=value` lines into `--key value` flags. Blank lines and `#`
/// comments are skipped; `key=true` becomes a bare `--key`.
fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::parse(path, i + 1, "expected key=value"));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config FILE` from the raw arguments and splices the file's
/// flags in right after the subcommand, so explicit flags (which come later)
/// take precedence.
fn expand_config(raw: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::with_capacity(raw.len());
    let mut config = None;
    let mut it = raw.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let v = it.next().ok_or_else(|| CliError::usage("--config needs a file"))?;
            config = Some(v);
        } else if let Some(v) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(v.into());
        } else {
            args.push(a);
        }
    }
    if let Some(path) = config {
        let flags = config_flags(Path::new(&path))?;
        let at = 2.min(args.len());
        args.splice(at..at, flags);
    }
    Ok(args)
}

fn main() -> ExitCode {
    let result = expand_config(std::env::args_os().collect()).and_then(|args| {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) if !e.use_stderr() => {
                // --help and --version.
                let _ = e.print();
                return Ok(());
            }
            Err(e) => return Err(CliError::usage(e.to_string().trim_end())),
        };
        commands::run(&cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
