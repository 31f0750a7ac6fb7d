//! `--config FILE` support: `key = value` lines become `--key value` flags
//! placed right after the subcommand, so flags given on the command line
//! (which come later) take precedence.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(path.into());
        }
    }
    None
}

/// Flags encoded by a config file. `true` and `false` values toggle
/// switches; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got `{line}`", n + 1);
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key `{key}`", n + 1);
        }
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

/// Splices config-file flags into `args` after the first subcommand name.
pub fn expand(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {}", path.to_string_lossy()))?;
    let extra = parse_config(&text)?;
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[OsString]) -> Vec<String> {
        v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
    }

    #[test]
    fn parses_values_and_switches() {
        let flags = parse_config("# comment\nm = 50\n\nunweighted-quantiles = true\nverbose = false\n").unwrap();
        assert_eq!(strings(&flags), ["--m", "50", "--unweighted-quantiles"]);
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn config_flags_precede_command_line_flags() {
        let file = tempfile::NamedTempFile::new().unwrap();
        fs::write(file.path(), "m = 50\nl = 3\n").unwrap();
        let args: Vec<OsString> = ["hazardboost", "--config", file.path().to_str().unwrap(), "train", "--m", "20"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand(args, &["train"]).unwrap();
        assert_eq!(
            strings(&out)[3..],
            ["train", "--m", "50", "--l", "3", "--m", "20"]
        );
    }
}
