use crate::contexts::{CtxFamily, CtxSet};
use crate::ids::{CallSite, MethodId};

use super::{AllocForm, DepKind, InterKind, MethodRoles, ModelBuilder, ModelError, ProgramModel, PtaObject};

/// Parses the line-oriented model format.
///
/// `#` starts a comment outside string literals. Lines of the form
/// `[section]` are accepted as visual grouping and otherwise ignored.
pub fn parse_model(text: &str) -> Result<ProgramModel, ModelError> {
    let mut b = ModelBuilder::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() || (content.starts_with('[') && content.ends_with(']')) {
            continue;
        }
        parse_line(&mut b, content, line).map_err(|e| match e {
            e @ ModelError::Syntax { .. } => e,
            other => ModelError::AtLine {
                line,
                source: Box::new(other),
            },
        })?;
    }
    b.build()
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, ch) in line.char_indices() {
        match ch {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn syntax(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_line(b: &mut ModelBuilder, content: &str, line: usize) -> Result<(), ModelError> {
    let (keyword, rest) = content
        .split_once(char::is_whitespace)
        .unwrap_or((content, ""));
    let rest = rest.trim();
    match keyword {
        "method" => parse_method(b, rest, line),
        "calledge" => parse_calledge(b, rest, line),
        "depnode" => parse_depnode(b, rest, line),
        "depedge" => parse_depedge(b, rest, line),
        "checkarg" => {
            let words: Vec<&str> = rest.split_whitespace().collect();
            let [site, var] = words.as_slice() else {
                return Err(syntax(line, "expected `checkarg <method>:<line> var=<name>`"));
            };
            let site = parse_site(site).ok_or_else(|| syntax(line, format!("bad call site `{site}`")))?;
            let var = var
                .strip_prefix("var=")
                .filter(|v| !v.is_empty())
                .ok_or_else(|| syntax(line, "expected `var=<name>`"))?;
            b.check_arg(site, var)?;
            Ok(())
        }
        "pta" => {
            let (var, method, body) = fact_head(rest, line)?;
            let mut cur = Cursor::new(body, line);
            let items = cur.set_of(|c| {
                c.expect('(')?;
                let ptype = c.word()?;
                c.expect(',')?;
                let alloc = c.word()?;
                c.expect(',')?;
                let ctx = c.ctx_set()?;
                c.expect(')')?;
                Ok(PtaObject { ptype, alloc, ctx })
            })?;
            cur.end()?;
            b.pta(var, method, items)?;
            Ok(())
        }
        "sa" => {
            let (var, method, body) = fact_head(rest, line)?;
            let mut cur = Cursor::new(body, line);
            let items = cur.set_of(|c| {
                c.expect('(')?;
                let lit = c.string()?;
                c.expect(',')?;
                let ctx = c.ctx_set()?;
                c.expect(')')?;
                Ok((lit, ctx))
            })?;
            cur.end()?;
            b.sa(var, method, items)?;
            Ok(())
        }
        other => Err(syntax(line, format!("unknown directive `{other}`"))),
    }
}

fn parse_method(b: &mut ModelBuilder, rest: &str, line: usize) -> Result<(), ModelError> {
    let mut words = rest.split_whitespace();
    let name = words.next().ok_or_else(|| syntax(line, "expected a method name"))?;
    check_name(name, line)?;
    let mut roles = MethodRoles::default();
    let mut domain = None;
    for w in words {
        match w {
            "entry" => roles.entry = true,
            "check" => roles.check = true,
            "priv" => roles.privileged = true,
            _ => match w.strip_prefix("domain=") {
                Some(d) if !d.is_empty() => domain = Some(d.to_string()),
                _ => return Err(syntax(line, format!("unexpected method attribute `{w}`"))),
            },
        }
    }
    b.method(name, roles, domain)?;
    Ok(())
}

fn parse_calledge(b: &mut ModelBuilder, rest: &str, line: usize) -> Result<(), ModelError> {
    let (head, ctx) = rest
        .split_once("ctx=")
        .ok_or_else(|| syntax(line, "call edge needs `ctx=any` or `ctx={...}`"))?;
    let words: Vec<&str> = head.split_whitespace().collect();
    let [id, caller, site, callee] = words.as_slice() else {
        return Err(syntax(line, "expected `calledge <id> <caller> <line> <callee> ctx=...`"));
    };
    check_name(caller, line)?;
    check_name(callee, line)?;
    let site = match site.parse::<u32>() {
        Ok(l) => CallSite::new(*caller, l),
        Err(_) => parse_site(site).ok_or_else(|| syntax(line, format!("bad call site `{site}`")))?,
    };
    let ctx = parse_family(ctx.trim(), line)?;
    b.call_edge(*id, *caller, site, *callee, ctx)?;
    Ok(())
}

fn parse_depnode(b: &mut ModelBuilder, rest: &str, line: usize) -> Result<(), ModelError> {
    let words: Vec<&str> = rest.split_whitespace().collect();
    if words.len() < 4 {
        return Err(syntax(line, "expected `depnode <id> <method> <line> kind=...`"));
    }
    let (id, method) = (words[0], words[1]);
    check_name(method, line)?;
    let at: u32 = words[2]
        .parse()
        .map_err(|_| syntax(line, format!("bad line number `{}`", words[2])))?;
    let mut kind = None;
    let (mut form, mut ptype, mut target, mut action) = (None, None, None, None);
    for w in &words[3..] {
        let (k, v) = w
            .split_once('=')
            .filter(|(_, v)| !v.is_empty())
            .ok_or_else(|| syntax(line, format!("expected `key=value`, found `{w}`")))?;
        let slot = match k {
            "kind" => &mut kind,
            "form" => &mut form,
            "type" => &mut ptype,
            "target" => &mut target,
            "action" => &mut action,
            _ => return Err(syntax(line, format!("unknown depnode field `{k}`"))),
        };
        if slot.replace(v.to_string()).is_some() {
            return Err(syntax(line, format!("field `{k}` given twice")));
        }
    }
    let kind = match kind.as_deref() {
        Some("alloc") => {
            let form = form
                .as_deref()
                .and_then(|f| f.parse::<u8>().ok())
                .and_then(AllocForm::from_number)
                .ok_or_else(|| syntax(line, "alloc node needs `form=1|2|3`"))?;
            let ptype = ptype.ok_or_else(|| syntax(line, "alloc node needs `type=`"))?;
            DepKind::Alloc {
                form,
                ptype,
                target,
                action,
            }
        }
        Some(k @ ("plain" | "callsite" | "return")) => {
            if form.is_some() || ptype.is_some() || target.is_some() || action.is_some() {
                return Err(syntax(line, format!("`kind={k}` takes no allocation fields")));
            }
            match k {
                "plain" => DepKind::Plain,
                "callsite" => DepKind::CallSite,
                _ => DepKind::Return,
            }
        }
        Some(k) => return Err(syntax(line, format!("unknown node kind `{k}`"))),
        None => return Err(syntax(line, "missing `kind=`")),
    };
    b.dep_node(id, method, at, kind)?;
    Ok(())
}

fn parse_depedge(b: &mut ModelBuilder, rest: &str, line: usize) -> Result<(), ModelError> {
    let words: Vec<&str> = rest.split_whitespace().collect();
    let inter = match words.get(2).copied() {
        None => InterKind::None,
        Some("inter=call") => InterKind::Call,
        Some("inter=return") => InterKind::Return,
        Some(w) => return Err(syntax(line, format!("unexpected depedge attribute `{w}`"))),
    };
    if words.len() < 2 || words.len() > 3 {
        return Err(syntax(line, "expected `depedge <from> <to> [inter=call|return]`"));
    }
    b.dep_edge(words[0], words[1], inter)?;
    Ok(())
}

fn check_name(name: &str, line: usize) -> Result<(), ModelError> {
    let bad = name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ':' | '@' | '=' | '{' | '}' | ',' | ';' | '"' | '(' | ')'));
    if bad {
        Err(syntax(line, format!("invalid method name `{name}`")))
    } else {
        Ok(())
    }
}

fn parse_site(tok: &str) -> Option<CallSite> {
    let (m, l) = tok.rsplit_once(':')?;
    if m.is_empty() {
        return None;
    }
    Some(CallSite::new(m, l.parse().ok()?))
}

pub(super) fn parse_family(text: &str, line: usize) -> Result<CtxFamily, ModelError> {
    if text == "any" {
        return Ok(CtxFamily::unconditional());
    }
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| syntax(line, format!("bad context family `{text}`")))?;
    if inner.trim().is_empty() {
        return Ok(CtxFamily::none());
    }
    inner
        .split(';')
        .map(|seg| {
            seg.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| parse_site(t).ok_or_else(|| syntax(line, format!("bad call site `{t}`"))))
                .collect::<Result<CtxSet, _>>()
        })
        .collect()
}

fn fact_head(rest: &str, line: usize) -> Result<(String, MethodId, &str), ModelError> {
    let (lhs, body) = rest
        .split_once('=')
        .ok_or_else(|| syntax(line, "expected `<var>@<method> = {...}`"))?;
    let (var, method) = lhs
        .trim()
        .split_once('@')
        .filter(|(v, m)| !v.is_empty() && !m.is_empty())
        .ok_or_else(|| syntax(line, "expected `<var>@<method>`"))?;
    check_name(method, line)?;
    Ok((var.to_string(), MethodId::new(method), body.trim()))
}

/// Minimal recursive-descent reader for fact bodies.
struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor { src, pos: 0, line }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn err(&self, msg: impl Into<String>) -> ModelError {
        syntax(self.line, format!("{} (column {})", msg.into(), self.pos + 1))
    }

    fn expect(&mut self, ch: char) -> Result<(), ModelError> {
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected `{ch}`")))
        }
    }

    fn eat(&mut self, ch: char) -> bool {
        let hit = self.peek() == Some(ch);
        if hit {
            self.pos += ch.len_utf8();
        }
        hit
    }

    fn word(&mut self) -> Result<String, ModelError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | '(' | ')' | '{' | '}'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected a name"));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn string(&mut self) -> Result<String, ModelError> {
        self.expect('"')?;
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => return Err(self.err("bad escape in string literal")),
                },
                c => out.push(c),
            }
        }
        Err(self.err("unterminated string literal"))
    }

    fn ctx_set(&mut self) -> Result<CtxSet, ModelError> {
        self.expect('{')?;
        let mut set = CtxSet::empty();
        if self.eat('}') {
            return Ok(set);
        }
        loop {
            let tok = self.word()?;
            let site = parse_site(&tok).ok_or_else(|| self.err(format!("bad call site `{tok}`")))?;
            set.insert(site);
            if self.eat('}') {
                return Ok(set);
            }
            self.expect(',')?;
        }
    }

    fn set_of<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, ModelError>,
    ) -> Result<Vec<T>, ModelError> {
        self.expect('{')?;
        let mut out = Vec::new();
        if self.eat('}') {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat('}') {
                return Ok(out);
            }
            self.expect(';')?;
        }
    }

    fn end(&mut self) -> Result<(), ModelError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.err("trailing input")),
        }
    }
}
