//! The program model: a context-sensitive call graph, a dependency graph for
//! permission-typed values, and the points-to / string facts that feed
//! permission generation.
//!
//! Models are built through [`ModelBuilder`] (or parsed from text with
//! [`parse_model`]) and are immutable afterwards.

mod parse;
mod write;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::contexts::{CtxFamily, CtxSet};
use crate::ids::{CallSite, MethodId};

pub use parse::parse_model;
pub use write::write_model;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("unknown {kind} `{name}`")]
    Dangling { kind: &'static str, name: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("entry method `{0}` has incoming call edges")]
    EntryHasIncoming(MethodId),
    #[error("call edge `{edge}`: site {site} does not belong to caller `{caller}`")]
    SiteMismatch {
        edge: String,
        site: CallSite,
        caller: MethodId,
    },
    #[error("no method is marked `{0}`")]
    MissingRole(&'static str),
    #[error("more than one method is marked `{0}`")]
    DuplicateRole(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallEdge {
    pub id: String,
    pub caller: MethodId,
    pub site: CallSite,
    pub callee: MethodId,
    /// Contexts under which the edge may be taken; `{∅}` when unconditional.
    pub ctx: CtxFamily,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: BTreeSet<MethodId>,
    pub edges: Vec<CallEdge>,
    pub entry: MethodId,
    pub check_node: MethodId,
    pub priv_node: MethodId,
}

impl CallGraph {
    pub fn out_edges<'a>(&'a self, m: &'a MethodId) -> impl Iterator<Item = &'a CallEdge> + 'a {
        self.edges.iter().filter(move |e| &e.caller == m)
    }

    pub fn in_edges<'a>(&'a self, m: &'a MethodId) -> impl Iterator<Item = &'a CallEdge> + 'a {
        self.edges.iter().filter(move |e| &e.callee == m)
    }

    pub fn edge(&self, id: &str) -> Option<&CallEdge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn call_sites(&self) -> BTreeSet<CallSite> {
        self.edges.iter().map(|e| e.site.clone()).collect()
    }

    pub fn is_call_site(&self, site: &CallSite) -> bool {
        self.edges.iter().any(|e| &e.site == site)
    }

    /// Methods reachable from the entry, ignoring edge contexts.
    pub fn reachable(&self) -> BTreeSet<MethodId> {
        let mut seen = BTreeSet::from([self.entry.clone()]);
        let mut queue = VecDeque::from([self.entry.clone()]);
        while let Some(m) = queue.pop_front() {
            for e in self.out_edges(&m) {
                if seen.insert(e.callee.clone()) {
                    queue.push_back(e.callee.clone());
                }
            }
        }
        seen
    }

    pub fn is_system(&self, m: &MethodId) -> bool {
        *m == self.check_node || *m == self.priv_node
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AllocForm {
    /// `new Type(target, action)`
    TargetAction,
    /// `new Type(target)`
    Target,
    /// `new Type()`
    NoArgs,
}

impl AllocForm {
    pub fn number(self) -> u8 {
        match self {
            AllocForm::TargetAction => 1,
            AllocForm::Target => 2,
            AllocForm::NoArgs => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(AllocForm::TargetAction),
            2 => Some(AllocForm::Target),
            3 => Some(AllocForm::NoArgs),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DepKind {
    Alloc {
        form: AllocForm,
        ptype: String,
        target: Option<String>,
        action: Option<String>,
    },
    Plain,
    CallSite,
    Return,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepNode {
    pub id: String,
    pub method: MethodId,
    pub line: u32,
    pub kind: DepKind,
}

impl DepNode {
    pub fn is_alloc(&self) -> bool {
        matches!(self.kind, DepKind::Alloc { .. })
    }

    pub fn location(&self) -> CallSite {
        CallSite::new(self.method.clone(), self.line)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InterKind {
    None,
    /// Argument passing into a callee.
    Call,
    /// A returned value flowing back to a call site.
    Return,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepEdge {
    pub from: String,
    pub to: String,
    pub inter: InterKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: Vec<DepNode>,
    pub edges: Vec<DepEdge>,
}

impl DepGraph {
    pub fn node(&self, id: &str) -> Option<&DepNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn nodes_at<'a>(&'a self, loc: &'a CallSite) -> impl Iterator<Item = &'a DepNode> + 'a {
        self.nodes
            .iter()
            .filter(move |n| n.method == loc.method && n.line == loc.line)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a DepEdge> + 'a {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a DepEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PtaObject {
    pub ptype: String,
    pub alloc: String,
    pub ctx: CtxSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PtaFact {
    pub var: String,
    pub method: MethodId,
    pub points_to: BTreeSet<PtaObject>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaFact {
    pub var: String,
    pub method: MethodId,
    pub values: BTreeSet<(String, CtxSet)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: MethodId,
    pub domain: Option<String>,
}

/// A fully resolved program model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramModel {
    pub methods: Vec<MethodDecl>,
    pub graph: CallGraph,
    pub dep: DepGraph,
    pub check_args: BTreeMap<CallSite, String>,
    pub pta: BTreeMap<(MethodId, String), PtaFact>,
    pub sa: BTreeMap<(MethodId, String), SaFact>,
    phi_meth: BTreeMap<MethodId, CtxFamily>,
}

impl ProgramModel {
    /// Abstract calling contexts of every method (see [`compute_phi_meth`]).
    pub fn phi_meth(&self) -> &BTreeMap<MethodId, CtxFamily> {
        &self.phi_meth
    }

    /// Contexts of `m`; empty for methods unreachable from the entry.
    pub fn contexts_of(&self, m: &MethodId) -> CtxFamily {
        self.phi_meth.get(m).cloned().unwrap_or_default()
    }

    pub fn domain_of(&self, m: &MethodId) -> Option<&str> {
        self.methods
            .iter()
            .find(|d| &d.name == m)
            .and_then(|d| d.domain.as_deref())
    }

    pub fn pta_fact(&self, method: &MethodId, var: &str) -> Option<&PtaFact> {
        self.pta.get(&(method.clone(), var.to_string()))
    }

    pub fn sa_fact(&self, method: &MethodId, var: &str) -> Option<&SaFact> {
        self.sa.get(&(method.clone(), var.to_string()))
    }

    /// Advisory consistency checks; never fatal.
    pub fn lints(&self) -> Vec<Lint> {
        lints(self)
    }
}

/// Least fixpoint of: `∅ ∈ F(entry)`; for each edge `(n, ζ, n')` and
/// `c ∈ F(n)`, `c ∪ {ζ} ∈ F(n')`.
pub fn compute_phi_meth(g: &CallGraph) -> BTreeMap<MethodId, CtxFamily> {
    let mut phi: BTreeMap<MethodId, CtxFamily> = BTreeMap::new();
    phi.insert(g.entry.clone(), CtxFamily::unconditional());
    let mut queue = VecDeque::from([g.entry.clone()]);
    while let Some(n) = queue.pop_front() {
        let here = phi[&n].clone();
        for e in g.out_edges(&n) {
            let target = phi.entry(e.callee.clone()).or_default();
            let mut grew = false;
            for c in here.iter() {
                grew |= target.insert(c.with(e.site.clone()));
            }
            if grew {
                queue.push_back(e.callee.clone());
            }
        }
    }
    phi
}

/// Contexts under which a specific call path is feasible: every union of one
/// context chosen per edge.
pub fn phi_route_along(path: &[&CallEdge]) -> CtxFamily {
    let mut acc = CtxFamily::unconditional();
    for e in path {
        let mut next = CtxFamily::none();
        for a in acc.iter() {
            for b in e.ctx.iter() {
                next.insert(a.union(b));
            }
        }
        acc = next;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CloneNode {
    pub ctx: CtxSet,
    pub method: MethodId,
}

impl fmt::Display for CloneNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.ctx, self.method)
    }
}

/// Context-cloned call graph for cloning-based analyzers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClonedGraph {
    pub nodes: BTreeSet<CloneNode>,
    pub edges: BTreeSet<(CloneNode, CallSite, CloneNode)>,
}

pub fn clone_graph(g: &CallGraph, phi: &BTreeMap<MethodId, CtxFamily>) -> ClonedGraph {
    let mut out = ClonedGraph::default();
    for (m, fam) in phi {
        for c in fam.iter() {
            out.nodes.insert(CloneNode {
                ctx: c.clone(),
                method: m.clone(),
            });
        }
    }
    for e in &g.edges {
        let (Some(from), Some(to)) = (phi.get(&e.caller), phi.get(&e.callee)) else {
            continue;
        };
        for c in from.iter() {
            for c2 in to.iter().filter(|c2| c.is_subset(c2)) {
                out.edges.insert((
                    CloneNode {
                        ctx: c.clone(),
                        method: e.caller.clone(),
                    },
                    e.site.clone(),
                    CloneNode {
                        ctx: c2.clone(),
                        method: e.callee.clone(),
                    },
                ));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lint {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Lint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning[{}]: {}", self.code, self.message)
    }
}

fn lints(model: &ProgramModel) -> Vec<Lint> {
    let g = &model.graph;
    let mut out = Vec::new();
    for e in &g.edges {
        if e.ctx.is_unconditional() {
            continue;
        }
        let phi = model.contexts_of(&e.caller);
        if !e.ctx.is_subset(&phi) {
            out.push(Lint {
                code: "edge-ctx",
                message: format!(
                    "edge {} has contexts outside the contexts of `{}`",
                    e.id, e.caller
                ),
            });
        }
    }
    // L1: out-edge contexts of a node cover exactly its contexts; an
    // unconditional edge covers all of them.
    for n in &g.nodes {
        let outs: Vec<&CallEdge> = g.out_edges(n).collect();
        if outs.is_empty() {
            continue;
        }
        let phi = model.contexts_of(n);
        let mut covered = CtxFamily::none();
        for e in outs {
            if e.ctx.is_unconditional() {
                covered.extend(&phi);
            } else {
                covered.extend(&e.ctx);
            }
        }
        if covered != phi {
            out.push(Lint {
                code: "L1",
                message: format!("out-edge contexts of `{n}` do not cover its calling contexts"),
            });
        }
    }
    for f in model.pta.values() {
        let phi = model.contexts_of(&f.method);
        for o in &f.points_to {
            if !phi.contains(&o.ctx) {
                out.push(Lint {
                    code: "fact-ctx",
                    message: format!(
                        "points-to fact {}@{} uses context {} not among the contexts of `{}`",
                        f.var, f.method, o.ctx, f.method
                    ),
                });
            }
        }
    }
    for f in model.sa.values() {
        let phi = model.contexts_of(&f.method);
        for (_, c) in &f.values {
            if !phi.contains(c) {
                out.push(Lint {
                    code: "fact-ctx",
                    message: format!(
                        "string fact {}@{} uses context {} not among the contexts of `{}`",
                        f.var, f.method, c, f.method
                    ),
                });
            }
        }
    }
    for e in g.in_edges(&g.check_node) {
        if model.dep.nodes_at(&e.site).next().is_none() {
            out.push(Lint {
                code: "checkpoint-dep",
                message: format!("checkpoint {} has no dependency-graph node", e.site),
            });
        }
    }
    out
}

/// Incremental construction of a [`ProgramModel`].
///
/// The `add_*` methods check local well-formedness (duplicates, field
/// shapes); [`ModelBuilder::build`] resolves cross references.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    methods: Vec<MethodDecl>,
    entry: Vec<MethodId>,
    check: Vec<MethodId>,
    privileged: Vec<MethodId>,
    edges: Vec<CallEdge>,
    dep: DepGraph,
    check_args: BTreeMap<CallSite, String>,
    pta: BTreeMap<(MethodId, String), PtaFact>,
    sa: BTreeMap<(MethodId, String), SaFact>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MethodRoles {
    pub entry: bool,
    pub check: bool,
    pub privileged: bool,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn method(
        &mut self,
        name: impl Into<MethodId>,
        roles: MethodRoles,
        domain: Option<String>,
    ) -> Result<&mut Self, ModelError> {
        let name = name.into();
        if self.methods.iter().any(|d| d.name == name) {
            return Err(ModelError::Duplicate {
                kind: "method",
                name: name.to_string(),
            });
        }
        if roles.entry {
            self.entry.push(name.clone());
        }
        if roles.check {
            self.check.push(name.clone());
        }
        if roles.privileged {
            self.privileged.push(name.clone());
        }
        self.methods.push(MethodDecl { name, domain });
        Ok(self)
    }

    pub fn plain_method(&mut self, name: impl Into<MethodId>) -> Result<&mut Self, ModelError> {
        self.method(name, MethodRoles::default(), None)
    }

    pub fn call_edge(
        &mut self,
        id: impl Into<String>,
        caller: impl Into<MethodId>,
        site: CallSite,
        callee: impl Into<MethodId>,
        ctx: CtxFamily,
    ) -> Result<&mut Self, ModelError> {
        let id = id.into();
        let caller = caller.into();
        if self.edges.iter().any(|e| e.id == id) {
            return Err(ModelError::Duplicate {
                kind: "call edge",
                name: id,
            });
        }
        if site.method != caller {
            return Err(ModelError::SiteMismatch {
                edge: id,
                site,
                caller,
            });
        }
        let callee = callee.into();
        if self
            .edges
            .iter()
            .any(|e| e.site == site && e.callee == callee)
        {
            return Err(ModelError::Duplicate {
                kind: "call edge",
                name: format!("{site} -> {callee}"),
            });
        }
        // An empty family would make the edge unusable; `{∅}` is the
        // unconditional family.
        self.edges.push(CallEdge {
            id,
            caller,
            site,
            callee,
            ctx,
        });
        Ok(self)
    }

    pub fn dep_node(
        &mut self,
        id: impl Into<String>,
        method: impl Into<MethodId>,
        line: u32,
        kind: DepKind,
    ) -> Result<&mut Self, ModelError> {
        let id = id.into();
        if self.dep.node(&id).is_some() {
            return Err(ModelError::Duplicate {
                kind: "dependency node",
                name: id,
            });
        }
        if let DepKind::Alloc {
            form,
            target,
            action,
            ..
        } = &kind
        {
            let ok = match form {
                AllocForm::TargetAction => target.is_some() && action.is_some(),
                AllocForm::Target => target.is_some() && action.is_none(),
                AllocForm::NoArgs => target.is_none() && action.is_none(),
            };
            if !ok {
                return Err(ModelError::Invalid(format!(
                    "allocation node `{id}` of form {} has inconsistent target/action fields",
                    form.number()
                )));
            }
        }
        self.dep.nodes.push(DepNode {
            id,
            method: method.into(),
            line,
            kind,
        });
        Ok(self)
    }

    pub fn dep_edge(
        &mut self,
        from: impl Into<String>,
        to: impl Into<String>,
        inter: InterKind,
    ) -> Result<&mut Self, ModelError> {
        let (from, to) = (from.into(), to.into());
        if self.dep.edges.iter().any(|e| e.from == from && e.to == to) {
            return Err(ModelError::Duplicate {
                kind: "dependency edge",
                name: format!("{from} -> {to}"),
            });
        }
        self.dep.edges.push(DepEdge { from, to, inter });
        Ok(self)
    }

    pub fn check_arg(&mut self, site: CallSite, var: impl Into<String>) -> Result<&mut Self, ModelError> {
        if self.check_args.contains_key(&site) {
            return Err(ModelError::Duplicate {
                kind: "checkarg",
                name: site.to_string(),
            });
        }
        self.check_args.insert(site, var.into());
        Ok(self)
    }

    pub fn pta(
        &mut self,
        var: impl Into<String>,
        method: impl Into<MethodId>,
        points_to: impl IntoIterator<Item = PtaObject>,
    ) -> Result<&mut Self, ModelError> {
        let (var, method) = (var.into(), method.into());
        let key = (method.clone(), var.clone());
        if self.pta.contains_key(&key) {
            return Err(ModelError::Duplicate {
                kind: "points-to fact",
                name: format!("{var}@{method}"),
            });
        }
        self.pta.insert(
            key,
            PtaFact {
                var,
                method,
                points_to: points_to.into_iter().collect(),
            },
        );
        Ok(self)
    }

    pub fn sa(
        &mut self,
        var: impl Into<String>,
        method: impl Into<MethodId>,
        values: impl IntoIterator<Item = (String, CtxSet)>,
    ) -> Result<&mut Self, ModelError> {
        let (var, method) = (var.into(), method.into());
        let key = (method.clone(), var.clone());
        if self.sa.contains_key(&key) {
            return Err(ModelError::Duplicate {
                kind: "string fact",
                name: format!("{var}@{method}"),
            });
        }
        self.sa.insert(
            key,
            SaFact {
                var,
                method,
                values: values.into_iter().collect(),
            },
        );
        Ok(self)
    }

    pub fn build(self) -> Result<ProgramModel, ModelError> {
        let role = |v: &[MethodId], name: &'static str| -> Result<MethodId, ModelError> {
            match v {
                [] => Err(ModelError::MissingRole(name)),
                [m] => Ok(m.clone()),
                _ => Err(ModelError::DuplicateRole(name)),
            }
        };
        let entry = role(&self.entry, "entry")?;
        let check_node = role(&self.check, "check")?;
        let priv_node = role(&self.privileged, "priv")?;
        if entry == check_node || entry == priv_node || check_node == priv_node {
            return Err(ModelError::Invalid(
                "entry, check and priv must be distinct methods".into(),
            ));
        }
        let nodes: BTreeSet<MethodId> = self.methods.iter().map(|d| d.name.clone()).collect();
        let known = |m: &MethodId| -> Result<(), ModelError> {
            if nodes.contains(m) {
                Ok(())
            } else {
                Err(ModelError::Dangling {
                    kind: "method",
                    name: m.to_string(),
                })
            }
        };
        for e in &self.edges {
            known(&e.caller)?;
            known(&e.callee)?;
            if e.callee == entry {
                return Err(ModelError::EntryHasIncoming(entry));
            }
        }
        let sites: BTreeSet<CallSite> = self.edges.iter().map(|e| e.site.clone()).collect();
        let known_site = |s: &CallSite| -> Result<(), ModelError> {
            if sites.contains(s) {
                Ok(())
            } else {
                Err(ModelError::Dangling {
                    kind: "call site",
                    name: s.to_string(),
                })
            }
        };
        for e in &self.edges {
            for c in e.ctx.iter() {
                c.iter().try_for_each(known_site)?;
            }
        }
        for n in &self.dep.nodes {
            known(&n.method)?;
        }
        for e in &self.dep.edges {
            for id in [&e.from, &e.to] {
                if self.dep.node(id).is_none() {
                    return Err(ModelError::Dangling {
                        kind: "dependency node",
                        name: id.clone(),
                    });
                }
            }
            if self.dep.node(&e.to).is_some_and(DepNode::is_alloc) {
                return Err(ModelError::Invalid(format!(
                    "allocation node `{}` has an incoming dependency edge",
                    e.to
                )));
            }
        }
        for site in self.check_args.keys() {
            let is_checkpoint = self
                .edges
                .iter()
                .any(|e| &e.site == site && e.callee == check_node);
            if !is_checkpoint {
                return Err(ModelError::Invalid(format!(
                    "checkarg {site} is not a call site of `{check_node}`"
                )));
            }
        }
        for f in self.pta.values() {
            known(&f.method)?;
            for o in &f.points_to {
                if self.dep.node(&o.alloc).is_none() {
                    return Err(ModelError::Dangling {
                        kind: "dependency node",
                        name: o.alloc.clone(),
                    });
                }
                o.ctx.iter().try_for_each(known_site)?;
            }
        }
        for f in self.sa.values() {
            known(&f.method)?;
            for (_, c) in &f.values {
                c.iter().try_for_each(known_site)?;
            }
        }
        let graph = CallGraph {
            nodes,
            edges: self.edges,
            entry,
            check_node,
            priv_node,
        };
        let phi_meth = compute_phi_meth(&graph);
        Ok(ProgramModel {
            methods: self.methods,
            graph,
            dep: self.dep,
            check_args: self.check_args,
            pta: self.pta,
            sa: self.sa,
            phi_meth,
        })
    }
}
