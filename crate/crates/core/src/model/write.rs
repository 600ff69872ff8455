use std::fmt::Write as _;

use crate::contexts::{CtxFamily, CtxSet};

use super::{DepKind, InterKind, ProgramModel};

/// Serializes a model in canonical form; [`super::parse_model`] reads it back
/// to an equal model.
pub fn write_model(m: &ProgramModel) -> String {
    let g = &m.graph;
    let mut out = String::new();
    for d in &m.methods {
        out.push_str("method ");
        out.push_str(d.name.as_str());
        for (flag, on) in [
            ("entry", d.name == g.entry),
            ("check", d.name == g.check_node),
            ("priv", d.name == g.priv_node),
        ] {
            if on {
                out.push(' ');
                out.push_str(flag);
            }
        }
        if let Some(dom) = &d.domain {
            let _ = write!(out, " domain={dom}");
        }
        out.push('\n');
    }
    for e in &g.edges {
        let _ = writeln!(
            out,
            "calledge {} {} {} {} ctx={}",
            e.id,
            e.caller,
            e.site.line,
            e.callee,
            family(&e.ctx)
        );
    }
    for n in &m.dep.nodes {
        let _ = write!(out, "depnode {} {} {} ", n.id, n.method, n.line);
        match &n.kind {
            DepKind::Alloc {
                form,
                ptype,
                target,
                action,
            } => {
                let _ = write!(out, "kind=alloc form={} type={ptype}", form.number());
                if let Some(t) = target {
                    let _ = write!(out, " target={t}");
                }
                if let Some(a) = action {
                    let _ = write!(out, " action={a}");
                }
            }
            DepKind::Plain => out.push_str("kind=plain"),
            DepKind::CallSite => out.push_str("kind=callsite"),
            DepKind::Return => out.push_str("kind=return"),
        }
        out.push('\n');
    }
    for e in &m.dep.edges {
        let _ = write!(out, "depedge {} {}", e.from, e.to);
        match e.inter {
            InterKind::None => {}
            InterKind::Call => out.push_str(" inter=call"),
            InterKind::Return => out.push_str(" inter=return"),
        }
        out.push('\n');
    }
    for (site, var) in &m.check_args {
        let _ = writeln!(out, "checkarg {site} var={var}");
    }
    for f in m.pta.values() {
        let items: Vec<String> = f
            .points_to
            .iter()
            .map(|o| format!("({}, {}, {})", o.ptype, o.alloc, set(&o.ctx)))
            .collect();
        let _ = writeln!(out, "pta {}@{} = {{{}}}", f.var, f.method, items.join("; "));
    }
    for f in m.sa.values() {
        let items: Vec<String> = f
            .values
            .iter()
            .map(|(lit, c)| format!("({}, {})", quote(lit), set(c)))
            .collect();
        let _ = writeln!(out, "sa {}@{} = {{{}}}", f.var, f.method, items.join("; "));
    }
    out
}

fn set(c: &CtxSet) -> String {
    let sites: Vec<String> = c.iter().map(ToString::to_string).collect();
    format!("{{{}}}", sites.join(","))
}

fn family(f: &CtxFamily) -> String {
    if f.is_unconditional() {
        return "any".into();
    }
    let parts: Vec<String> = f
        .iter()
        .map(|c| c.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
        .collect();
    format!("{{{}}}", parts.join(";"))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
