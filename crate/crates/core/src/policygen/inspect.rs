use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::Policy;
use crate::ids::MethodId;
use crate::model::CallGraph;
use crate::permgen::Permission;

/// Outcome of comparing a user policy with a generated one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    /// Generated grants absent from the given policy.
    pub missing: BTreeMap<MethodId, BTreeSet<Permission>>,
    /// Given grants that the analysis does not require. Informational.
    pub over_granted: BTreeMap<MethodId, BTreeSet<Permission>>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (m, ps) in &self.missing {
            for p in ps {
                writeln!(f, "missing: method {m}: {p}")?;
            }
        }
        Ok(())
    }
}

fn difference(a: &Policy, b: &Policy) -> BTreeMap<MethodId, BTreeSet<Permission>> {
    let mut out = BTreeMap::new();
    for (m, ps) in &a.grants {
        let extra: BTreeSet<Permission> = ps.difference(&b.permissions_of(m)).cloned().collect();
        if !extra.is_empty() {
            out.insert(m.clone(), extra);
        }
    }
    out
}

/// Passes iff every generated grant is present in `given`.
pub fn check_policy(given: &Policy, generated: &Policy) -> CheckReport {
    CheckReport {
        missing: difference(generated, given),
        over_granted: difference(given, generated),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub method: MethodId,
    /// Set on the frame that invoked the privileged action.
    pub privileged: bool,
}

impl Frame {
    pub fn new(method: impl Into<MethodId>) -> Self {
        Frame {
            method: method.into(),
            privileged: false,
        }
    }

    pub fn privileged(method: impl Into<MethodId>) -> Self {
        Frame {
            method: method.into(),
            privileged: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inspection {
    Pass,
    Fail { at: MethodId },
}

impl Inspection {
    pub fn passed(&self) -> bool {
        matches!(self, Inspection::Pass)
    }
}

/// Walks `stack` (top first) as a runtime permission check would.
///
/// System methods hold every permission. The walk ends successfully on
/// reaching the frame that invoked the privileged action; that frame and
/// everything beneath it are not inspected.
pub fn simulate_inspection(
    stack: &[Frame],
    perm: &Permission,
    policy: &Policy,
    graph: &CallGraph,
) -> Inspection {
    for frame in stack {
        if frame.privileged {
            break;
        }
        if !graph.is_system(&frame.method) && !policy.holds(&frame.method, perm) {
            return Inspection::Fail {
                at: frame.method.clone(),
            };
        }
    }
    Inspection::Pass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> CallGraph {
        CallGraph {
            nodes: BTreeSet::new(),
            edges: vec![],
            entry: "s".into(),
            check_node: "chk".into(),
            priv_node: "prv".into(),
        }
    }

    #[test]
    fn empty_stack_passes() {
        let p = Permission::new("X");
        assert!(simulate_inspection(&[], &p, &Policy::new(), &graph()).passed());
    }

    #[test]
    fn fails_at_first_missing_frame() {
        let p = Permission::new("X");
        let mut pol = Policy::new();
        pol.grant("a".into(), p.clone());
        let stack = [Frame::new("chk"), Frame::new("a"), Frame::new("b"), Frame::new("s")];
        assert_eq!(
            simulate_inspection(&stack, &p, &pol, &graph()),
            Inspection::Fail { at: "b".into() }
        );
    }

    #[test]
    fn privileged_frame_ends_the_walk() {
        let p = Permission::new("X");
        let mut pol = Policy::new();
        pol.grant("a".into(), p.clone());
        let stack = [
            Frame::new("chk"),
            Frame::new("a"),
            Frame::new("prv"),
            Frame::privileged("b"),
            Frame::new("s"),
        ];
        assert!(simulate_inspection(&stack, &p, &pol, &graph()).passed());
    }

    #[test]
    fn superset_policy_passes_with_plp_note() {
        let mut gen = Policy::new();
        gen.grant("a".into(), Permission::new("X"));
        let mut given = gen.clone();
        given.grant("a".into(), Permission::new("Y"));
        let r = check_policy(&given, &gen);
        assert!(r.passed());
        assert_eq!(r.over_granted.len(), 1);
        let r = check_policy(&Policy::new(), &gen);
        assert!(!r.passed());
        assert_eq!(r.to_string(), "missing: method a: X\n");
    }
}
