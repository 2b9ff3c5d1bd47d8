//! Flat `key = value` config files. Keys are flag names without the leading
//! dashes; `#` starts a comment. Entries are spliced into argv right after
//! the subcommand so that flags given on the command line override them.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::CliResult;

pub fn parse(text: &str, path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            format!("{}:{}: expected `key = value`, got {raw:?}", path.display(), n + 1)
        })?;
        let key = key.trim().trim_start_matches("--");
        if key == "config" {
            return Err(format!("{}:{}: config files cannot nest", path.display(), n + 1).into());
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Returns argv with the config file's entries inserted after the subcommand.
/// Boolean entries become bare flags when true and are dropped when false.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut injected = Vec::new();
    for (key, value) in parse(&text, path)? {
        match value.as_str() {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let kv = parse("# run\nk = 5\n\n--lambda1=0.2  # tuned\n", Path::new("c")).unwrap();
        assert_eq!(kv, vec![("k".into(), "5".into()), ("lambda1".into(), "0.2".into())]);
        assert!(parse("nonsense\n", Path::new("c")).is_err());
    }
}
