//! Conditional weighted pushdown systems with a single control location.
//!
//! A rule `lhs --[cond]--> rhs` may fire when `lhs` is on top of the stack and
//! the set of call sites strictly below it satisfies `cond`. Conditions are
//! subset predicates: `ContainsOneOf(F)` holds iff some context in `F` is a
//! subset of the call sites on the rest of the stack.
//!
//! Stacks are represented bottom-first (`stack.last()` is the top).

mod reduce;
mod solve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::contexts::CtxFamily;
use crate::ids::{CallSite, MethodId};
use crate::weights::{Weight, WeightError};

pub use reduce::{annotate_stack, reduce_to_wpds, AnnotatedSymbol, ReducedSystem};
pub use solve::{movp, movp_with_stats, MovpStats, SolverOptions, DEFAULT_ITERATION_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("saturation did not converge within {cap} iterations")]
    IterationCap { cap: usize },
    #[error("rule for `{lhs}` has {len} right-hand symbols; at most 2 are allowed")]
    RuleTooLong { lhs: String, len: usize },
}

/// Stack alphabet.
///
/// `Resume(ζ)` is the frame of `ζ.method` after the call at `ζ` has returned
/// a permission object to it; the only moves from it follow that object.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StackSymbol {
    Method(MethodId),
    Site(CallSite),
    Resume(CallSite),
}

impl StackSymbol {
    pub fn as_site(&self) -> Option<&CallSite> {
        match self {
            StackSymbol::Site(s) => Some(s),
            _ => None,
        }
    }

    /// The method whose frame this symbol stands for, if any.
    pub fn frame_method(&self) -> Option<&MethodId> {
        match self {
            StackSymbol::Method(m) => Some(m),
            StackSymbol::Resume(s) => Some(&s.method),
            StackSymbol::Site(_) => None,
        }
    }
}

impl fmt::Display for StackSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackSymbol::Method(m) => write!(f, "{m}"),
            StackSymbol::Site(s) => write!(f, "{s}"),
            StackSymbol::Resume(s) => write!(f, "{}@{}", s.method, s.line),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Any,
    ContainsOneOf(CtxFamily),
}

impl Condition {
    /// Normalizes `{∅}` to `Any`.
    pub fn from_family(f: &CtxFamily) -> Condition {
        if f.is_unconditional() {
            Condition::Any
        } else {
            Condition::ContainsOneOf(f.clone())
        }
    }

    pub fn holds(&self, below: &BTreeSet<CallSite>) -> bool {
        match self {
            Condition::Any => true,
            Condition::ContainsOneOf(f) => f.satisfied_by(below),
        }
    }

    pub fn mentioned_sites(&self) -> BTreeSet<CallSite> {
        match self {
            Condition::Any => BTreeSet::new(),
            Condition::ContainsOneOf(f) => f.mentioned_sites(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Any => f.write_str("any"),
            Condition::ContainsOneOf(fam) => {
                f.write_str("{")?;
                for (i, c) in fam.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    for (j, s) in c.iter().enumerate() {
                        if j > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{s}")?;
                    }
                }
                f.write_str("}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    Push,
    Swap,
    Pop,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CondRule {
    pub lhs: StackSymbol,
    pub cond: Condition,
    /// New top first: for a push `[callee, return_site]`.
    pub rhs: Vec<StackSymbol>,
    pub weight: Weight,
}

impl CondRule {
    pub fn kind(&self) -> RuleKind {
        match self.rhs.len() {
            0 => RuleKind::Pop,
            1 => RuleKind::Swap,
            _ => RuleKind::Push,
        }
    }
}

impl fmt::Display for CondRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} --[{}]--> ", self.lhs, self.cond)?;
        if self.rhs.is_empty() {
            f.write_str("eps")?;
        } else {
            for (i, s) in self.rhs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{s}")?;
            }
        }
        write!(f, " ; {}", self.weight)
    }
}

/// A conditional WPDS with a single implicit control location.
#[derive(Clone, Debug)]
pub struct CWPDSystem {
    start: StackSymbol,
    rules: Vec<CondRule>,
    alphabet: BTreeSet<StackSymbol>,
    by_lhs: BTreeMap<StackSymbol, Vec<usize>>,
}

impl CWPDSystem {
    /// Builds the system; duplicate rules are dropped and rules are kept in a
    /// canonical order.
    pub fn new(start: StackSymbol, rules: Vec<CondRule>) -> Result<Self, SolverError> {
        for r in &rules {
            if r.rhs.len() > 2 {
                return Err(SolverError::RuleTooLong {
                    lhs: r.lhs.to_string(),
                    len: r.rhs.len(),
                });
            }
        }
        let rules: Vec<CondRule> = rules
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut alphabet = BTreeSet::from([start.clone()]);
        let mut by_lhs: BTreeMap<StackSymbol, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            alphabet.insert(r.lhs.clone());
            alphabet.extend(r.rhs.iter().cloned());
            by_lhs.entry(r.lhs.clone()).or_default().push(i);
        }
        Ok(CWPDSystem {
            start,
            rules,
            alphabet,
            by_lhs,
        })
    }

    pub fn start(&self) -> &StackSymbol {
        &self.start
    }

    pub fn rules(&self) -> &[CondRule] {
        &self.rules
    }

    pub fn alphabet(&self) -> &BTreeSet<StackSymbol> {
        &self.alphabet
    }

    pub fn rules_for(&self, lhs: &StackSymbol) -> &[usize] {
        self.by_lhs.get(lhs).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Call sites mentioned by any rule condition.
    pub fn condition_sites(&self) -> BTreeSet<CallSite> {
        self.rules
            .iter()
            .flat_map(|r| r.cond.mentioned_sites())
            .collect()
    }

    /// Rules enabled on `stack` under the conditional semantics.
    pub fn applicable(&self, stack: &[StackSymbol]) -> Vec<usize> {
        let Some((top, rest)) = stack.split_last() else {
            return Vec::new();
        };
        let below: BTreeSet<CallSite> = rest.iter().filter_map(|s| s.as_site().cloned()).collect();
        self.rules_for(top)
            .iter()
            .copied()
            .filter(|&i| self.rules[i].cond.holds(&below))
            .collect()
    }

    /// Applies rule `idx` to the top of `stack`. The caller must have checked
    /// applicability.
    pub fn apply(&self, stack: &mut Vec<StackSymbol>, idx: usize) {
        let rule = &self.rules[idx];
        stack.pop();
        stack.extend(rule.rhs.iter().rev().cloned());
    }

    /// One line per rule: pushes, then swaps, then pops, each group sorted.
    pub fn dump(&self) -> String {
        let mut lines: Vec<(RuleKind, String)> = self
            .rules
            .iter()
            .map(|r| (r.kind(), r.to_string()))
            .collect();
        lines.sort();
        let mut out = String::new();
        for (_, l) in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}
