//! Config files are replayed as long options placed before the real command
//! line, so explicit flags win (every subcommand lets a later occurrence
//! of an option override an earlier one).

use std::ffi::OsString;
use std::path::Path;

/// Value of `--config` in raw arguments, if any.
pub fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Options from a config file that apply to `command`. Keys before any
/// section header are shared, so they are passed on only when `defines`
/// says the command has that option; keys in the command's own section are
/// always passed, and clap rejects unknown ones.
pub fn file_flags(text: &str, command: &str, defines: impl Fn(&str) -> bool) -> Result<Vec<OsString>, String> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value, got {raw:?}", no + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key {key:?}", no + 1));
        }
        match section.as_deref() {
            Some(s) if s != command => continue,
            None if !defines(&key) => continue,
            _ => {}
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

/// The argument vector with config-file options spliced in after the
/// subcommand name.
pub fn expand_args(args: Vec<OsString>, defines: impl Fn(&str, &str) -> bool) -> Result<Vec<OsString>, String> {
    let Some(path) = find_config(&args) else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("cannot read config {}: {e}", Path::new(&path).display()))?;
    let command = args[1].to_string_lossy().into_owned();
    let mut out = args[..2].to_vec();
    out.extend(file_flags(&text, &command, |key| defines(&command, key))?);
    out.extend(args[2..].iter().cloned());
    Ok(out)
}
