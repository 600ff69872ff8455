//! Reference semantics by explicit enumeration.
//!
//! Valid call paths, dependency paths and their bracket matching are
//! enumerated directly, with each edge used at most `bound` times per path.
//! The result is exhaustive on acyclic models and an under-approximation
//! otherwise. Meant for cross-checking the pushdown engine on small inputs.

use std::collections::BTreeSet;

use crate::ids::{CallSite, MethodId};
use crate::model::{CallEdge, CallGraph, DepEdge, InterKind, ProgramModel};
use crate::permgen::{Permission, PermissionSet};
use crate::policygen::{Frame, Policy};

pub const DEFAULT_BOUND: usize = 2;

/// A call path from the entry, or a suffix of one that starts at the
/// privileged node.
///
/// Edges are indices into the call graph's edge list. A truncated path keeps
/// the edges that led to the privileged node in `prefix`: they count toward
/// validity and the site history but not toward the methods on the path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallPath {
    pub prefix: Vec<usize>,
    pub edges: Vec<usize>,
    pub truncated: bool,
}

impl CallPath {
    pub fn empty() -> Self {
        CallPath {
            prefix: vec![],
            edges: vec![],
            truncated: false,
        }
    }

    /// Prefix followed by the path proper.
    pub fn full(&self) -> impl Iterator<Item = usize> + '_ {
        self.prefix.iter().chain(&self.edges).copied()
    }

    pub fn edges<'g>(&self, g: &'g CallGraph) -> Vec<&'g CallEdge> {
        self.edges.iter().map(|&i| &g.edges[i]).collect()
    }

    pub fn edge_ids(&self, g: &CallGraph) -> Vec<String> {
        self.edges.iter().map(|&i| g.edges[i].id.clone()).collect()
    }

    /// Every call site traversed, prefix included.
    pub fn sites(&self, g: &CallGraph) -> BTreeSet<CallSite> {
        self.full().map(|i| g.edges[i].site.clone()).collect()
    }

    /// Both endpoints of every edge of the path proper.
    pub fn meths(&self, g: &CallGraph) -> BTreeSet<MethodId> {
        self.edges
            .iter()
            .flat_map(|&i| [g.edges[i].caller.clone(), g.edges[i].callee.clone()])
            .collect()
    }

    /// Site of the final edge.
    pub fn last_site<'g>(&self, g: &'g CallGraph) -> Option<&'g CallSite> {
        self.edges.last().map(|&i| &g.edges[i].site)
    }

    /// Runtime stack, top first, that executing the full path produces. The
    /// caller of the privileged node carries the privileged flag.
    pub fn to_stack(&self, g: &CallGraph) -> Vec<Frame> {
        let full: Vec<&CallEdge> = self.full().map(|i| &g.edges[i]).collect();
        let mut frames = Vec::with_capacity(full.len() + 1);
        if let Some(last) = full.last() {
            frames.push(Frame::new(last.callee.clone()));
        }
        for e in full.iter().rev() {
            frames.push(Frame {
                method: e.caller.clone(),
                privileged: e.callee == g.priv_node,
            });
        }
        if frames.is_empty() {
            frames.push(Frame::new(g.entry.clone()));
        }
        frames
    }
}

fn valid(g: &CallGraph, full: &[usize]) -> bool {
    let sites: BTreeSet<CallSite> = full.iter().map(|&i| g.edges[i].site.clone()).collect();
    // Per-edge choice is equivalent to a single choice from the route family.
    full.iter().all(|&i| g.edges[i].ctx.satisfied_by(&sites))
}

/// Valid call paths ending at `target`, full or truncated at the privileged
/// node. A full path through the privileged node is replaced by its
/// truncations.
pub fn enum_vpaths(model: &ProgramModel, target: &MethodId, bound: usize) -> Vec<CallPath> {
    let g = &model.graph;
    let mut out = BTreeSet::new();
    let mut path = Vec::new();
    let mut uses = vec![0usize; g.edges.len()];
    walk(g, &g.entry, target, bound, &mut path, &mut uses, &mut out);
    out.into_iter().collect()
}

fn walk(
    g: &CallGraph,
    at: &MethodId,
    target: &MethodId,
    bound: usize,
    path: &mut Vec<usize>,
    uses: &mut [usize],
    out: &mut BTreeSet<CallPath>,
) {
    if !path.is_empty() && at == target && valid(g, path) {
        let cuts: Vec<usize> = (0..path.len())
            .filter(|&i| g.edges[path[i]].caller == g.priv_node)
            .collect();
        if cuts.is_empty() {
            out.insert(CallPath {
                prefix: vec![],
                edges: path.clone(),
                truncated: false,
            });
        }
        for i in cuts {
            out.insert(CallPath {
                prefix: path[..i].to_vec(),
                edges: path[i..].to_vec(),
                truncated: true,
            });
        }
    }
    for (i, e) in g.edges.iter().enumerate() {
        if &e.caller != at || uses[i] >= bound {
            continue;
        }
        uses[i] += 1;
        path.push(i);
        walk(g, &e.callee, target, bound, path, uses, out);
        path.pop();
        uses[i] -= 1;
    }
}

/// A dependency path: a start node and indices into the dependency edges.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DepPath {
    pub start: String,
    pub edges: Vec<usize>,
}

impl DepPath {
    pub fn nodes<'a>(&'a self, model: &'a ProgramModel) -> Vec<&'a str> {
        let mut v = vec![self.start.as_str()];
        v.extend(self.edges.iter().map(|&i| model.dep.edges[i].to.as_str()));
        v
    }

    pub fn meths(&self, model: &ProgramModel) -> BTreeSet<MethodId> {
        self.nodes(model)
            .into_iter()
            .filter_map(|id| model.dep.node(id).map(|n| n.method.clone()))
            .collect()
    }

    pub fn start_method(&self, model: &ProgramModel) -> Option<MethodId> {
        model.dep.node(&self.start).map(|n| n.method.clone())
    }
}

/// Dependency paths from any allocation node to `end`.
pub fn dpaths(model: &ProgramModel, end: &str, bound: usize) -> Vec<DepPath> {
    let dep = &model.dep;
    let mut out = BTreeSet::new();
    for n in dep.nodes.iter().filter(|n| n.is_alloc()) {
        let mut path = Vec::new();
        let mut uses = vec![0usize; dep.edges.len()];
        dep_walk(model, &n.id, &n.id, end, bound, &mut path, &mut uses, &mut out);
    }
    out.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
fn dep_walk(
    model: &ProgramModel,
    start: &str,
    at: &str,
    end: &str,
    bound: usize,
    path: &mut Vec<usize>,
    uses: &mut [usize],
    out: &mut BTreeSet<DepPath>,
) {
    if at == end {
        out.insert(DepPath {
            start: start.to_string(),
            edges: path.clone(),
        });
    }
    for (i, e) in model.dep.edges.iter().enumerate() {
        if e.from != at || uses[i] >= bound {
            continue;
        }
        uses[i] += 1;
        path.push(i);
        dep_walk(model, start, &e.to, end, bound, path, uses, out);
        path.pop();
        uses[i] -= 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bracket {
    Open(CallSite),
    Close(CallSite),
}

/// Brackets contributed by interprocedural edges: argument passing opens at
/// the calling site, a return closes at the receiving site.
pub fn extract(model: &ProgramModel, pi: &DepPath) -> Vec<Bracket> {
    let sites = model.graph.call_sites();
    let loc = |id: &str| model.dep.node(id).map(|n| n.location());
    pi.edges
        .iter()
        .filter_map(|&i| {
            let DepEdge { from, to, inter } = &model.dep.edges[i];
            match inter {
                InterKind::Call => loc(from).filter(|s| sites.contains(s)).map(Bracket::Open),
                InterKind::Return => loc(to).filter(|s| sites.contains(s)).map(Bracket::Close),
                InterKind::None => None,
            }
        })
        .collect()
}

/// Every close is matched by an equal open on top of the stack; unmatched
/// opens may remain.
pub fn well_matched<'a>(word: impl IntoIterator<Item = &'a Bracket>) -> bool {
    let mut stack: Vec<&CallSite> = Vec::new();
    for b in word {
        match b {
            Bracket::Open(s) => stack.push(s),
            Bracket::Close(s) => {
                if stack.pop() != Some(s) {
                    return false;
                }
            }
        }
    }
    true
}

/// Call paths to the start of `pi` that the path's returns can unwind.
///
/// An allocation in the entry method is reached by the empty path.
pub fn match_paths(model: &ProgramModel, pi: &DepPath, bound: usize) -> Vec<CallPath> {
    let g = &model.graph;
    let Some(m0) = pi.start_method(model) else {
        return vec![];
    };
    let mut candidates = enum_vpaths(model, &m0, bound);
    if m0 == g.entry {
        candidates.insert(0, CallPath::empty());
    }
    let tail = extract(model, pi);
    candidates
        .into_iter()
        .filter(|sigma| {
            let opens: Vec<Bracket> = sigma
                .full()
                .map(|i| Bracket::Open(g.edges[i].site.clone()))
                .collect();
            well_matched(opens.iter().chain(&tail))
        })
        .collect()
}

/// Evidence for one checkpoint: method coverage of a dependency path plus
/// a matching call path, and the sites of that call path.
struct Witness {
    cover: BTreeSet<MethodId>,
    sites: BTreeSet<CallSite>,
}

fn witnesses(model: &ProgramModel, checkpoint: &CallSite, bound: usize) -> Vec<Witness> {
    let g = &model.graph;
    let mut out = Vec::new();
    for node in model.dep.nodes_at(checkpoint) {
        for pi in dpaths(model, &node.id, bound) {
            let pm = pi.meths(model);
            for sp in match_paths(model, &pi, bound) {
                let mut cover = pm.clone();
                cover.extend(sp.meths(g));
                cover.insert(g.check_node.clone());
                out.push(Witness {
                    cover,
                    sites: sp.sites(g),
                });
            }
        }
    }
    out
}

fn related(
    model: &ProgramModel,
    sigma: &CallPath,
    perms: &PermissionSet,
    evidence: &[Witness],
) -> BTreeSet<Permission> {
    let meths = sigma.meths(&model.graph);
    let mut out = BTreeSet::new();
    for w in evidence.iter().filter(|w| meths.is_subset(&w.cover)) {
        for p in &perms.perms {
            if perms.contexts(p).satisfied_by(&w.sites) {
                out.insert(p.clone());
            }
        }
    }
    out
}

/// Permissions a valid path to the check method relates to.
pub fn related_permissions(
    model: &ProgramModel,
    sigma: &CallPath,
    perms: &PermissionSet,
    bound: usize,
) -> BTreeSet<Permission> {
    let Some(k) = sigma.last_site(&model.graph) else {
        return BTreeSet::new();
    };
    related(model, sigma, perms, &witnesses(model, k, bound))
}

/// Permissions actually checked along `sigma`: those it relates to that were
/// generated at its checkpoint.
pub fn demanded_permissions(
    model: &ProgramModel,
    sigma: &CallPath,
    perms: &PermissionSet,
    bound: usize,
) -> BTreeSet<Permission> {
    let Some(k) = sigma.last_site(&model.graph) else {
        return BTreeSet::new();
    };
    let here = perms.generated_at(k);
    related_permissions(model, sigma, perms, bound)
        .into_iter()
        .filter(|p| here.contains(p))
        .collect()
}

/// Grants every permission a valid path relates to on every non-system
/// method of that path.
pub fn oracle_policy(model: &ProgramModel, perms: &PermissionSet, bound: usize) -> Policy {
    let g = &model.graph;
    let mut policy = Policy {
        grants: Default::default(),
        domains: model
            .methods
            .iter()
            .filter_map(|d| d.domain.clone().map(|dom| (d.name.clone(), dom)))
            .collect(),
    };
    let paths = enum_vpaths(model, &g.check_node, bound);
    let mut cache: Vec<(CallSite, Vec<Witness>)> = Vec::new();
    for sigma in &paths {
        let Some(k) = sigma.last_site(g) else { continue };
        let idx = match cache.iter().position(|(s, _)| s == k) {
            Some(i) => i,
            None => {
                cache.push((k.clone(), witnesses(model, k, bound)));
                cache.len() - 1
            }
        };
        let rel = related(model, sigma, perms, &cache[idx].1);
        if rel.is_empty() {
            continue;
        }
        for m in sigma.meths(g) {
            if g.is_system(&m) {
                continue;
            }
            for p in &rel {
                policy.grant(m.clone(), p.clone());
            }
        }
    }
    policy
}
