//! Reduction of stack-subset conditions to an ordinary WPDS over annotated
//! symbols.
//!
//! Every stack symbol is paired with the set of call sites strictly beneath it.
//! That set is all a condition can observe, so a rule instance at an annotated
//! top is enabled iff its condition holds on the annotation. Annotations are
//! produced on demand from the rule that creates a symbol.

use std::collections::BTreeSet;

use super::{CWPDSystem, StackSymbol};
use crate::ids::CallSite;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotatedSymbol {
    pub base: StackSymbol,
    pub below: BTreeSet<CallSite>,
}

impl AnnotatedSymbol {
    pub fn new(base: StackSymbol, below: BTreeSet<CallSite>) -> Self {
        AnnotatedSymbol { base, below }
    }
}

/// View of a [`CWPDSystem`] as an unconditional WPDS over annotated symbols.
///
/// With `relevant = Some(sites)`, annotations are projected onto `sites`.
/// Projecting onto the sites that conditions mention preserves applicability
/// and keeps the number of distinct annotations small.
#[derive(Clone, Debug)]
pub struct ReducedSystem<'a> {
    sys: &'a CWPDSystem,
    relevant: Option<BTreeSet<CallSite>>,
}

/// Exact reduction: annotations are the full site set below each symbol.
pub fn reduce_to_wpds(sys: &CWPDSystem) -> ReducedSystem<'_> {
    ReducedSystem {
        sys,
        relevant: None,
    }
}

impl<'a> ReducedSystem<'a> {
    /// Reduction whose annotations only track sites mentioned by conditions.
    pub fn projected(sys: &'a CWPDSystem) -> Self {
        ReducedSystem {
            sys,
            relevant: Some(sys.condition_sites()),
        }
    }

    pub fn system(&self) -> &'a CWPDSystem {
        self.sys
    }

    pub fn start(&self) -> AnnotatedSymbol {
        AnnotatedSymbol::new(self.sys.start().clone(), BTreeSet::new())
    }

    fn track(&self, site: &CallSite) -> bool {
        self.relevant.as_ref().is_none_or(|r| r.contains(site))
    }

    pub fn applies(&self, rule: usize, top: &AnnotatedSymbol) -> bool {
        let r = &self.sys.rules()[rule];
        r.lhs == top.base && r.cond.holds(&top.below)
    }

    /// Annotated right-hand side of `rule` fired at `top`, new top first.
    pub fn rhs(&self, rule: usize, top: &AnnotatedSymbol) -> Vec<AnnotatedSymbol> {
        let r = &self.sys.rules()[rule];
        match r.rhs.as_slice() {
            [] => Vec::new(),
            [a] => vec![AnnotatedSymbol::new(a.clone(), top.below.clone())],
            [a, b] => {
                let mut above = top.below.clone();
                if let Some(s) = b.as_site() {
                    if self.track(s) {
                        above.insert(s.clone());
                    }
                }
                vec![
                    AnnotatedSymbol::new(a.clone(), above),
                    AnnotatedSymbol::new(b.clone(), top.below.clone()),
                ]
            }
            _ => unreachable!("rules are normalized to at most two symbols"),
        }
    }

    /// Enabled rules at `top` with their annotated right-hand sides.
    pub fn successors(&self, top: &AnnotatedSymbol) -> Vec<(usize, Vec<AnnotatedSymbol>)> {
        self.sys
            .rules_for(&top.base)
            .iter()
            .copied()
            .filter(|&i| self.applies(i, top))
            .map(|i| (i, self.rhs(i, top)))
            .collect()
    }
}

/// Exact annotation of a concrete bottom-first stack.
pub fn annotate_stack(stack: &[StackSymbol]) -> Vec<AnnotatedSymbol> {
    let mut below = BTreeSet::new();
    let mut out = Vec::with_capacity(stack.len());
    for s in stack {
        out.push(AnnotatedSymbol::new(s.clone(), below.clone()));
        if let Some(site) = s.as_site() {
            below.insert(site.clone());
        }
    }
    out
}
