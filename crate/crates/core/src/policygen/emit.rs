use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::Policy;
use crate::ids::MethodId;
use crate::permgen::{quoted, Permission};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyFormat {
    /// `method <name>: <Type>("target"[,"action"])`, one grant per line.
    Table,
    /// Java policy file, one `grant` block per protection domain.
    Java,
}

impl FromStr for PolicyFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(PolicyFormat::Table),
            "java" => Ok(PolicyFormat::Java),
            other => Err(format!("unknown policy format `{other}` (expected table or java)")),
        }
    }
}

impl fmt::Display for PolicyFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyFormat::Table => "table",
            PolicyFormat::Java => "java",
        })
    }
}

pub fn emit_policy(policy: &Policy, format: PolicyFormat) -> String {
    let mut lines: Vec<String> = match format {
        PolicyFormat::Table => policy
            .pairs()
            .map(|(m, p)| format!("method {m}: {p}"))
            .collect(),
        PolicyFormat::Java => policy
            .domain_view()
            .into_iter()
            .map(|(dom, perms)| {
                let body: String = perms.iter().map(|p| format!(" {};", java_permission(p))).collect();
                format!("grant codeBase {} {{{body} }};", quoted(&dom))
            })
            .collect(),
    };
    lines.sort();
    lines.into_iter().map(|l| l + "\n").collect()
}

fn java_permission(p: &Permission) -> String {
    let mut s = format!("permission {}", p.ptype);
    if let Some(t) = &p.target {
        s.push(' ');
        s.push_str(&quoted(t));
        if let Some(a) = &p.action {
            s.push_str(", ");
            s.push_str(&quoted(a));
        }
    }
    s
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("policy line {line}: {msg}")]
pub struct PolicyParseError {
    pub line: usize,
    pub msg: String,
}

/// Reads the `table` format back. Blank lines and `#` comments are skipped.
pub fn parse_table_policy(text: &str) -> Result<Policy, PolicyParseError> {
    let mut policy = Policy::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let err = |msg: &str| PolicyParseError {
            line,
            msg: msg.to_string(),
        };
        let rest = content
            .strip_prefix("method ")
            .ok_or_else(|| err("expected `method <name>: <permission>`"))?;
        let (name, perm) = rest
            .split_once(": ")
            .ok_or_else(|| err("expected `: ` after the method name"))?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(err("invalid method name"));
        }
        let p = parse_permission(perm.trim()).map_err(|m| err(&m))?;
        policy.grant(MethodId::new(name), p);
    }
    Ok(policy)
}

fn parse_permission(s: &str) -> Result<Permission, String> {
    let Some(open) = s.find('(') else {
        if s.is_empty() || s.contains(|c: char| c.is_whitespace() || c == '"') {
            return Err(format!("bad permission `{s}`"));
        }
        return Ok(Permission::new(s));
    };
    let ptype = &s[..open];
    if ptype.is_empty() {
        return Err("missing permission type".into());
    }
    let args = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| "missing `)`".to_string())?;
    let (target, rest) = read_string(args)?;
    let rest = rest.trim_start();
    if rest.is_empty() {
        return Ok(Permission::with_target(ptype, target));
    }
    let rest = rest
        .strip_prefix(',')
        .ok_or_else(|| "expected `,` between target and action".to_string())?;
    let (action, rest) = read_string(rest.trim_start())?;
    if !rest.trim().is_empty() {
        return Err("trailing text after action".into());
    }
    Ok(Permission::with_action(ptype, target, action))
}

fn read_string(s: &str) -> Result<(String, &str), String> {
    let body = s
        .strip_prefix('"')
        .ok_or_else(|| "expected a quoted string".to_string())?;
    let mut out = String::new();
    let mut chars = body.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, &body[i + 1..])),
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => out.push(e),
                _ => return Err("bad escape".into()),
            },
            c => out.push(c),
        }
    }
    Err("unterminated string".into())
}
