//! `--config` support: TOML keys become flags placed ahead of the user's
//! own, so with self-overriding arguments the command line wins.

use std::ffi::OsString;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Returns the `--config` value if present. Scanning argv directly lets the
/// file be applied before clap sees the final argument list.
pub fn find_config(argv: &[OsString]) -> CliResult<Option<OsString>> {
    let mut found = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            let v = it.next().ok_or_else(|| CliError::usage("--config needs a value"))?;
            found = Some(v.clone());
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(OsString::from(v));
        }
    }
    Ok(found)
}

fn scalar(key: &str, v: &toml::Value) -> CliResult<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        _ => return Err(CliError::usage(format!("config key {key:?}: unsupported value type"))),
    })
}

/// Translates a TOML table into flags. Arrays become comma-separated lists.
/// Boolean values are passed through as `--key true|false`, matching the
/// value-taking boolean flags of the grammar.
pub fn config_flags(path: &Path) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::usage(format!("config {}: {}", path.display(), e.message())))?;
    let mut out = Vec::new();
    for (key, value) in &table {
        if key == "config" {
            return Err(CliError::usage("config files cannot nest --config"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match value {
            toml::Value::Array(items) => items
                .iter()
                .map(|v| scalar(key, v))
                .collect::<CliResult<Vec<_>>>()?
                .join(","),
            v => scalar(key, v)?,
        };
        out.push(OsString::from(flag));
        out.push(OsString::from(rendered));
    }
    Ok(out)
}

/// Rebuilds argv as `prog <subcommand path> <config flags> <user args>`.
/// `path` holds the subcommand names already recognized by a first parse.
pub fn splice(argv: &[OsString], path: &[String], flags: Vec<OsString>) -> Vec<OsString> {
    let mut out = vec![argv[0].clone()];
    out.extend(path.iter().map(OsString::from));
    out.extend(flags);
    let mut matched = 0;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            it.next();
            continue;
        }
        if s.starts_with("--config=") {
            continue;
        }
        if matched < path.len() && s == path[matched].as_str() {
            matched += 1;
            continue;
        }
        out.push(a.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_value_is_found_in_both_spellings() {
        assert_eq!(
            find_config(&os(&["q", "score", "--config", "a.toml"])).unwrap(),
            Some("a.toml".into())
        );
        assert_eq!(
            find_config(&os(&["q", "--config=b.toml", "score"])).unwrap(),
            Some("b.toml".into())
        );
        assert_eq!(find_config(&os(&["q", "score"])).unwrap(), None);
        assert!(find_config(&os(&["q", "--config"])).is_err());
    }

    #[test]
    fn flags_follow_the_subcommand_and_precede_user_args() {
        let argv = os(&["q", "--config", "c.toml", "analyze", "temporal", "--input", "x"]);
        let path = vec!["analyze".to_string(), "temporal".to_string()];
        let got = splice(&argv, &path, os(&["--workers", "2"]));
        assert_eq!(got, os(&["q", "analyze", "temporal", "--workers", "2", "--input", "x"]));
    }

    #[test]
    fn toml_values_render_as_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(
            &p,
            "order = 4\nalpha = 0.5\nthresholds = [0.5, 0.9]\nformat = \"jsonl\"\n",
        )
        .unwrap();
        let flags = config_flags(&p).unwrap();
        let flags: Vec<String> = flags.iter().map(|f| f.to_string_lossy().into_owned()).collect();
        assert_eq!(
            flags,
            [
                "--alpha",
                "0.5",
                "--format",
                "jsonl",
                "--order",
                "4",
                "--thresholds",
                "0.5,0.9"
            ]
        );
    }
}
