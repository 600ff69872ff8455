//! Policy generation: encode the model as a conditional WPDS, solve for the
//! weight of reaching the check method, and read grants off the result.

mod emit;
mod inspect;

use std::collections::{BTreeMap, BTreeSet};

use crate::contexts::CtxFamily;
use crate::cwpds::{movp, CWPDSystem, CondRule, Condition, SolverError, SolverOptions, StackSymbol};
use crate::ids::{CallSite, MethodId};
use crate::model::{CallEdge, DepKind, InterKind, ProgramModel};
use crate::permgen::{Permission, PermissionSet};
use crate::weights::{KillSet, Weight, WeightTuple};

pub use emit::{emit_policy, parse_table_policy, PolicyFormat, PolicyParseError};
pub use inspect::{check_policy, simulate_inspection, CheckReport, Frame, Inspection};

/// Permissions granted to each method. Methods with no grants are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub grants: BTreeMap<MethodId, BTreeSet<Permission>>,
    /// Protection domain of each method that declares one.
    pub domains: BTreeMap<MethodId, String>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn grant(&mut self, m: MethodId, p: Permission) -> bool {
        self.grants.entry(m).or_default().insert(p)
    }

    pub fn revoke(&mut self, m: &MethodId, p: &Permission) -> bool {
        let Some(set) = self.grants.get_mut(m) else {
            return false;
        };
        let hit = set.remove(p);
        if set.is_empty() {
            self.grants.remove(m);
        }
        hit
    }

    pub fn holds(&self, m: &MethodId, p: &Permission) -> bool {
        self.grants.get(m).is_some_and(|s| s.contains(p))
    }

    pub fn permissions_of(&self, m: &MethodId) -> BTreeSet<Permission> {
        self.grants.get(m).cloned().unwrap_or_default()
    }

    /// Every `(method, permission)` grant in order.
    pub fn pairs(&self) -> impl Iterator<Item = (&MethodId, &Permission)> {
        self.grants
            .iter()
            .flat_map(|(m, ps)| ps.iter().map(move |p| (m, p)))
    }

    pub fn len(&self) -> usize {
        self.grants.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn domain_of<'a>(&'a self, m: &'a MethodId) -> &'a str {
        self.domains.get(m).map_or(m.as_str(), String::as_str)
    }

    /// Union of member grants per domain; undomained methods form their own.
    pub fn domain_view(&self) -> BTreeMap<String, BTreeSet<Permission>> {
        let mut out: BTreeMap<String, BTreeSet<Permission>> = BTreeMap::new();
        for (m, ps) in &self.grants {
            out.entry(self.domain_of(m).to_string())
                .or_default()
                .extend(ps.iter().cloned());
        }
        out
    }
}

fn push_weight(model: &ProgramModel, caller: &MethodId, site: &CallSite) -> Weight {
    let kill = if *caller == model.graph.priv_node {
        KillSet::All
    } else {
        KillSet::none()
    };
    Weight::from_tuple(WeightTuple {
        kill,
        gen: BTreeSet::from([caller.clone()]),
        finished: BTreeSet::new(),
        history: BTreeSet::from([site.clone()]),
    })
}

/// Stack symbols at which a permission value held by a dependency node at
/// `loc` is available: the plain frame of the method when the value is
/// created locally or arrives as an argument, and the resumed frame after a
/// call when it was returned by that call.
fn feeders(model: &ProgramModel, start: &[&str]) -> BTreeSet<StackSymbol> {
    let dep = &model.dep;
    let sites = model.graph.call_sites();
    let mut out = BTreeSet::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut stack: Vec<&str> = start.to_vec();
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        let Some(node) = dep.node(id) else { continue };
        if matches!(node.kind, DepKind::Alloc { .. }) {
            out.insert(StackSymbol::Method(node.method.clone()));
        }
        for e in dep.incoming(id) {
            match e.inter {
                InterKind::Call => {
                    out.insert(StackSymbol::Method(node.method.clone()));
                }
                InterKind::Return => {
                    let loc = node.location();
                    if sites.contains(&loc) {
                        out.insert(StackSymbol::Resume(loc));
                    }
                }
                InterKind::None => {
                    if dep.node(&e.from).is_some_and(|n| n.method == node.method) {
                        stack.push(&e.from);
                    }
                }
            }
        }
    }
    out
}

/// Builds the pushdown system whose paths model valid executions that end in
/// a permission check.
///
/// Ordinary call edges become push rules `m -> m' ζ` guarded by the edge's
/// contexts. A call into the check method is pushed only from frames where a
/// permission value reaches the checkpoint. A value returned from a call
/// pops the callee and resumes the caller at the call site.
pub fn encode(model: &ProgramModel) -> Result<CWPDSystem, SolverError> {
    let g = &model.graph;
    let mut rules = Vec::new();
    for e in &g.edges {
        let CallEdge {
            caller, site, callee, ctx, ..
        } = e;
        let cond = Condition::from_family(ctx);
        let weight = push_weight(model, caller, site);
        let rhs = vec![StackSymbol::Method(callee.clone()), StackSymbol::Site(site.clone())];
        let sources: BTreeSet<StackSymbol> = if *callee == g.check_node {
            let at: Vec<&str> = model.dep.nodes_at(site).map(|n| n.id.as_str()).collect();
            feeders(model, &at)
        } else {
            BTreeSet::from([StackSymbol::Method(caller.clone())])
        };
        for lhs in sources {
            rules.push(CondRule {
                lhs,
                cond: cond.clone(),
                rhs: rhs.clone(),
                weight: weight.clone(),
            });
        }
    }
    let sites = g.call_sites();
    for e in &model.dep.edges {
        if e.inter != InterKind::Return {
            continue;
        }
        let (Some(from), Some(to)) = (model.dep.node(&e.from), model.dep.node(&e.to)) else {
            continue;
        };
        let ret = to.location();
        if !sites.contains(&ret) {
            continue;
        }
        let finished = Weight::from_tuple(WeightTuple {
            finished: BTreeSet::from([from.method.clone()]),
            ..WeightTuple::identity()
        });
        for lhs in feeders(model, &[from.id.as_str()]) {
            rules.push(CondRule {
                lhs,
                cond: Condition::Any,
                rhs: vec![],
                weight: finished.clone(),
            });
        }
        rules.push(CondRule {
            lhs: StackSymbol::Site(ret.clone()),
            cond: Condition::Any,
            rhs: vec![StackSymbol::Resume(ret)],
            weight: Weight::one(),
        });
    }
    CWPDSystem::new(StackSymbol::Method(g.entry.clone()), rules)
}

/// Whether some context of `p` lies within `history`.
fn required_by(ctx: &CtxFamily, history: &BTreeSet<CallSite>) -> bool {
    ctx.satisfied_by(history)
}

/// Reads grants off a solved weight: each tuple requires the permissions
/// whose contexts it covers, on behalf of the methods still live in it.
pub fn extract_policy(model: &ProgramModel, perms: &PermissionSet, result: &Weight) -> Policy {
    let g = &model.graph;
    let mut policy = Policy {
        grants: BTreeMap::new(),
        domains: model
            .methods
            .iter()
            .filter_map(|d| d.domain.clone().map(|dom| (d.name.clone(), dom)))
            .collect(),
    };
    for t in result.tuples() {
        let required: Vec<&Permission> = perms
            .perms
            .iter()
            .filter(|p| required_by(&perms.contexts(p), &t.history))
            .collect();
        if required.is_empty() {
            continue;
        }
        for m in t.live_methods() {
            if g.is_system(&m) {
                continue;
            }
            for p in &required {
                policy.grant(m.clone(), (*p).clone());
            }
        }
    }
    policy
}

/// Encodes, solves and extracts. Returns the policy with the raw solver
/// weight so callers can inspect individual tuples.
pub fn generate_policy(
    model: &ProgramModel,
    perms: &PermissionSet,
    opts: SolverOptions,
) -> Result<(Policy, Weight), SolverError> {
    let sys = encode(model)?;
    let check = StackSymbol::Method(model.graph.check_node.clone());
    let result = movp(&sys, |s| *s == check, opts)?;
    Ok((extract_policy(model, perms, &result), result))
}
