//! The policy-generation weight domain.
//!
//! A weight is a finite set of tuples `(kill, gen, finished, history)`. Each
//! tuple acts as a gen/kill transformer on the set of methods on the abstract
//! stack: composing `t` then `t'` kills `kill ∪ kill'` and generates
//! `(gen \ kill') ∪ gen'`. The `finished` and `history` components only
//! accumulate. Combine is set union; the empty set is ZERO.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ids::{CallSite, MethodId};

/// Default cap on the number of tuples in a single weight.
pub const DEFAULT_TUPLE_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("weight grew to {size} tuples, exceeding the cap of {cap}")]
    TupleCapExceeded { size: usize, cap: usize },
}

/// Methods invalidated below a point on the stack. `All` is the whole universe.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KillSet {
    Methods(BTreeSet<MethodId>),
    All,
}

impl KillSet {
    pub fn none() -> Self {
        KillSet::Methods(BTreeSet::new())
    }

    pub fn kills(&self, m: &MethodId) -> bool {
        match self {
            KillSet::All => true,
            KillSet::Methods(s) => s.contains(m),
        }
    }

    pub fn union(&self, other: &KillSet) -> KillSet {
        match (self, other) {
            (KillSet::All, _) | (_, KillSet::All) => KillSet::All,
            (KillSet::Methods(a), KillSet::Methods(b)) => {
                KillSet::Methods(a.union(b).cloned().collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightTuple {
    pub kill: KillSet,
    pub gen: BTreeSet<MethodId>,
    pub finished: BTreeSet<MethodId>,
    pub history: BTreeSet<CallSite>,
}

impl WeightTuple {
    pub fn identity() -> Self {
        WeightTuple {
            kill: KillSet::none(),
            gen: BTreeSet::new(),
            finished: BTreeSet::new(),
            history: BTreeSet::new(),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &WeightTuple) -> WeightTuple {
        let mut gen: BTreeSet<MethodId> = self
            .gen
            .iter()
            .filter(|m| !next.kill.kills(m))
            .cloned()
            .collect();
        gen.extend(next.gen.iter().cloned());
        WeightTuple {
            kill: self.kill.union(&next.kill),
            gen,
            finished: self.finished.union(&next.finished).cloned().collect(),
            history: self.history.union(&next.history).cloned().collect(),
        }
    }

    /// Methods still live on the stack: `gen \ finished`.
    pub fn live_methods(&self) -> BTreeSet<MethodId> {
        self.gen.difference(&self.finished).cloned().collect()
    }
}

impl fmt::Display for WeightTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &BTreeSet<T>) -> fmt::Result {
            f.write_str("{")?;
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("}")
        }
        f.write_str("(kill=")?;
        match &self.kill {
            KillSet::All => f.write_str("ALL")?,
            KillSet::Methods(s) => list(f, s)?,
        }
        f.write_str(" gen=")?;
        list(f, &self.gen)?;
        f.write_str(" fin=")?;
        list(f, &self.finished)?;
        f.write_str(" hist=")?;
        list(f, &self.history)?;
        f.write_str(")")
    }
}

/// An element of the weight domain. The empty tuple set is ZERO.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(BTreeSet<WeightTuple>);

impl Weight {
    pub fn zero() -> Self {
        Weight(BTreeSet::new())
    }

    pub fn one() -> Self {
        Weight(BTreeSet::from([WeightTuple::identity()]))
    }

    pub fn from_tuple(t: WeightTuple) -> Self {
        Weight(BTreeSet::from([t]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0.contains(&WeightTuple::identity())
    }

    pub fn tuples(&self) -> &BTreeSet<WeightTuple> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn combine(&self, other: &Weight) -> Weight {
        Weight(self.0.union(&other.0).cloned().collect())
    }

    pub fn combine_capped(&self, other: &Weight, cap: usize) -> Result<Weight, WeightError> {
        let out = self.combine(other);
        check_cap(out, cap)
    }

    /// In-place combine; returns whether `self` grew.
    pub fn combine_in_place(&mut self, other: &Weight) -> bool {
        let before = self.0.len();
        self.0.extend(other.0.iter().cloned());
        self.0.len() != before
    }

    pub fn extend(&self, other: &Weight) -> Weight {
        let mut out = BTreeSet::new();
        for a in &self.0 {
            for b in &other.0 {
                out.insert(a.then(b));
            }
        }
        Weight(out)
    }

    pub fn extend_capped(&self, other: &Weight, cap: usize) -> Result<Weight, WeightError> {
        check_cap(self.extend(other), cap)
    }

    /// `self ⊑ other` iff `self ⊕ other = self`; ZERO is the top element.
    pub fn leq(&self, other: &Weight) -> bool {
        other.0.is_subset(&self.0)
    }
}

fn check_cap(w: Weight, cap: usize) -> Result<Weight, WeightError> {
    if w.len() > cap {
        Err(WeightError::TupleCapExceeded { size: w.len(), cap })
    } else {
        Ok(w)
    }
}

impl FromIterator<WeightTuple> for Weight {
    fn from_iter<I: IntoIterator<Item = WeightTuple>>(iter: I) -> Self {
        Weight(iter.into_iter().collect())
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        if self.is_one() {
            return f.write_str("1");
        }
        f.write_str("{")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}
