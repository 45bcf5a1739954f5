//! `--config FILE`: a flat JSON object whose keys are the long flag names of
//! the chosen subcommand. Its entries are spliced into the argument list
//! ahead of the command-line flags, so explicit flags win.

use clap::{Command, CommandFactory};
use serde_json::Value;

use crate::Cli;

/// Global flags that take a value, so their values are not mistaken for subcommands.
const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--threads", "--config"];

pub fn find_config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Position just after the subcommand path (e.g. `verify kernel`) and the
/// clap command it names.
fn subcommand_end(args: &[String]) -> Option<(usize, Command)> {
    let mut cmd = Cli::command();
    let mut i = 1;
    let mut found = None;
    while i < args.len() {
        let a = &args[i];
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            i += 1;
            continue;
        }
        match cmd.find_subcommand(a).cloned() {
            Some(sub) => {
                let leaf = !sub.has_subcommands();
                cmd = sub;
                i += 1;
                found = Some(i);
                if leaf {
                    break;
                }
            }
            None => break,
        }
    }
    found.map(|end| (end, cmd))
}

fn to_tokens(flag: &str, value: &Value) -> Result<Vec<String>, String> {
    let scalar = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("config key {flag:?}: unsupported value {other}")),
    };
    Ok(match value {
        Value::Bool(true) => vec![format!("--{flag}")],
        Value::Bool(false) | Value::Null => vec![],
        Value::Array(items) => {
            let parts: Result<Vec<String>, String> = items.iter().map(scalar).collect();
            vec![format!("--{flag}"), parts?.join(",")]
        }
        other => vec![format!("--{flag}"), scalar(other)?],
    })
}

/// Returns `args` with the config entries inserted after the subcommand.
pub fn splice_config(args: Vec<String>, text: &str) -> Result<Vec<String>, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let Value::Object(map) = doc else {
        return Err("config must be a JSON object".into());
    };
    let (end, cmd) = subcommand_end(&args).ok_or("config given without a subcommand")?;
    let known: Vec<String> = cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let mut tokens = Vec::new();
    for (key, value) in &map {
        let flag = key.replace('_', "-");
        if flag == "config" || !known.contains(&flag) {
            return Err(format!("unknown config key {key:?} for `{}`", cmd.get_name()));
        }
        tokens.extend(to_tokens(&flag, value)?);
    }
    let mut out = args[..end].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[end..]);
    Ok(out)
}
