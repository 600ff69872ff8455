//! Calling contexts and their set-of-call-sites abstraction.
//!
//! A concrete context is a call-site string, most recent call first. The
//! abstraction forgets order and multiplicity and keeps only the set of call
//! sites that occur, so recursive call chains collapse into finitely many
//! abstract contexts.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ids::CallSite;

/// Default cap on the number of sites [`concretize`] will enumerate.
pub const DEFAULT_CONCRETIZE_BOUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("cannot enumerate concretization of {size} call sites (bound is {bound})")]
    BoundExceeded { size: usize, bound: usize },
}

/// A call-site string; index 0 is the most recent call.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CtxString(pub Vec<CallSite>);

impl CtxString {
    pub fn empty() -> Self {
        CtxString(Vec::new())
    }

    pub fn sites(&self) -> &[CallSite] {
        &self.0
    }
}

impl FromIterator<CallSite> for CtxString {
    fn from_iter<I: IntoIterator<Item = CallSite>>(iter: I) -> Self {
        CtxString(iter.into_iter().collect())
    }
}

/// An abstract calling context: the set of call sites on a call sequence.
/// The empty set is the entry (unconditional) context.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CtxSet(BTreeSet<CallSite>);

impl CtxSet {
    pub fn empty() -> Self {
        CtxSet(BTreeSet::new())
    }

    pub fn sites(&self) -> &BTreeSet<CallSite> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: &CallSite) -> bool {
        self.0.contains(site)
    }

    pub fn insert(&mut self, site: CallSite) -> bool {
        self.0.insert(site)
    }

    pub fn is_subset(&self, other: &CtxSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Subset test against a raw site set (e.g. a stack annotation).
    pub fn is_subset_of_sites(&self, sites: &BTreeSet<CallSite>) -> bool {
        self.0.is_subset(sites)
    }

    pub fn union(&self, other: &CtxSet) -> CtxSet {
        CtxSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn with(&self, site: CallSite) -> CtxSet {
        let mut out = self.clone();
        out.0.insert(site);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &CallSite> {
        self.0.iter()
    }
}

impl FromIterator<CallSite> for CtxSet {
    fn from_iter<I: IntoIterator<Item = CallSite>>(iter: I) -> Self {
        CtxSet(iter.into_iter().collect())
    }
}

impl From<BTreeSet<CallSite>> for CtxSet {
    fn from(s: BTreeSet<CallSite>) -> Self {
        CtxSet(s)
    }
}

impl fmt::Display for CtxSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("}")
    }
}

/// A finite set of abstract contexts.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CtxFamily(BTreeSet<CtxSet>);

impl CtxFamily {
    /// The family with no contexts at all. As an edge condition it never holds.
    pub fn none() -> Self {
        CtxFamily(BTreeSet::new())
    }

    /// `{∅}`: holds under every stack.
    pub fn unconditional() -> Self {
        CtxFamily(BTreeSet::from([CtxSet::empty()]))
    }

    pub fn is_unconditional(&self) -> bool {
        self.0.len() == 1 && self.0.iter().all(CtxSet::is_empty)
    }

    pub fn contexts(&self) -> &BTreeSet<CtxSet> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, ctx: CtxSet) -> bool {
        self.0.insert(ctx)
    }

    pub fn contains(&self, ctx: &CtxSet) -> bool {
        self.0.contains(ctx)
    }

    pub fn is_subset(&self, other: &CtxFamily) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn extend(&mut self, other: &CtxFamily) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn iter(&self) -> impl Iterator<Item = &CtxSet> {
        self.0.iter()
    }

    /// Lifted order on families: every member of `self` is a subset of
    /// some member of `other`. Plain inclusion implies it.
    pub fn leq(&self, other: &CtxFamily) -> bool {
        self.0.iter().all(|a| other.0.iter().any(|b| a.is_subset(b)))
    }

    /// Some member context is contained in `sites`.
    pub fn satisfied_by(&self, sites: &BTreeSet<CallSite>) -> bool {
        self.0.iter().any(|c| c.is_subset_of_sites(sites))
    }

    /// All call sites mentioned by any member.
    pub fn mentioned_sites(&self) -> BTreeSet<CallSite> {
        self.0.iter().flat_map(|c| c.iter().cloned()).collect()
    }
}

impl FromIterator<CtxSet> for CtxFamily {
    fn from_iter<I: IntoIterator<Item = CtxSet>>(iter: I) -> Self {
        CtxFamily(iter.into_iter().collect())
    }
}

impl fmt::Display for CtxFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// The set of distinct call sites occurring in `c`.
pub fn abstract_ctx(c: &CtxString) -> CtxSet {
    c.0.iter().cloned().collect()
}

/// Element-wise abstraction of a finite set of context strings.
///
/// No subset pruning: `{ζ1}` and `{ζ1, ζ2}` may both be present.
pub fn abstract_ctx_set<'a, I>(cs: I) -> CtxFamily
where
    I: IntoIterator<Item = &'a CtxString>,
{
    cs.into_iter().map(abstract_ctx).collect()
}

/// All permutations of all subsets of `c`, including the empty word.
pub fn concretize(c: &CtxSet, bound: usize) -> Result<BTreeSet<CtxString>, ContextError> {
    if c.len() > bound {
        return Err(ContextError::BoundExceeded {
            size: c.len(),
            bound,
        });
    }
    let sites: Vec<CallSite> = c.iter().cloned().collect();
    let mut out = BTreeSet::new();
    let mut used = vec![false; sites.len()];
    let mut word = Vec::with_capacity(sites.len());
    permute(&sites, &mut used, &mut word, &mut out);
    Ok(out)
}

// Every prefix of every permutation of `sites` is a permutation of a subset.
fn permute(
    sites: &[CallSite],
    used: &mut [bool],
    word: &mut Vec<CallSite>,
    out: &mut BTreeSet<CtxString>,
) {
    out.insert(CtxString(word.clone()));
    for i in 0..sites.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        word.push(sites[i].clone());
        permute(sites, used, word, out);
        word.pop();
        used[i] = false;
    }
}

/// Powerset extension of [`concretize`].
pub fn concretize_family(
    cs: &CtxFamily,
    bound: usize,
) -> Result<BTreeSet<CtxString>, ContextError> {
    let mut out = BTreeSet::new();
    for c in cs.iter() {
        out.extend(concretize(c, bound)?);
    }
    Ok(out)
}

/// `a ≤ b` iff every site of `a` occurs in `b`.
pub fn ctx_leq(a: &CtxString, b: &CtxString) -> bool {
    a.0.iter().all(|s| b.0.contains(s))
}

/// Lifted order: every string of `a` is below some string of `b`.
pub fn set_leq<'a, 'b, A, B>(a: A, b: B) -> bool
where
    A: IntoIterator<Item = &'a CtxString>,
    B: IntoIterator<Item = &'b CtxString> + Clone,
{
    a.into_iter()
        .all(|x| b.clone().into_iter().any(|y| ctx_leq(x, y)))
}
