//! Meet-over-all-paths by summary-based saturation.
//!
//! The solver tabulates, for every annotated frame entry `E` (a symbol that
//! was pushed, or the start symbol) and every annotated symbol `X`, the
//! combined weight of all same-level derivations from `E` to `X`. Pops close
//! a frame and produce a summary for `E`, which is spliced in at every push
//! that created `E`. A second pass propagates the weight of reaching each
//! entry from the start symbol, and the answer combines
//! `reach(E) ⊗ path(E, X)` over all `X` whose base symbol is a target.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::reduce::{AnnotatedSymbol, ReducedSystem};
use super::{CWPDSystem, SolverError, StackSymbol};
use crate::weights::{Weight, DEFAULT_TUPLE_CAP};

/// Guard against runaway saturation; the weight lattice is finite so this
/// should never trigger on a well-formed system.
pub const DEFAULT_ITERATION_CAP: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub tuple_cap: usize,
    pub iteration_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tuple_cap: DEFAULT_TUPLE_CAP,
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MovpStats {
    pub entries: usize,
    pub path_edges: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CallRecord {
    entry: AnnotatedSymbol,
    at: AnnotatedSymbol,
    rule: usize,
    ret: AnnotatedSymbol,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Item {
    Path(AnnotatedSymbol, AnnotatedSymbol),
    Summary(AnnotatedSymbol),
}

struct Saturation<'a> {
    red: ReducedSystem<'a>,
    opts: SolverOptions,
    path: HashMap<(AnnotatedSymbol, AnnotatedSymbol), Weight>,
    summary: HashMap<AnnotatedSymbol, Weight>,
    // callee entry -> pushes that created it
    callers: HashMap<AnnotatedSymbol, HashSet<CallRecord>>,
    queue: VecDeque<Item>,
    queued: HashSet<Item>,
    iterations: usize,
}

impl<'a> Saturation<'a> {
    fn new(sys: &'a CWPDSystem, opts: SolverOptions) -> Self {
        Saturation {
            red: ReducedSystem::projected(sys),
            opts,
            path: HashMap::new(),
            summary: HashMap::new(),
            callers: HashMap::new(),
            queue: VecDeque::new(),
            queued: HashSet::new(),
            iterations: 0,
        }
    }

    fn enqueue(&mut self, item: Item) {
        if self.queued.insert(item.clone()) {
            self.queue.push_back(item);
        }
    }

    fn add_path(
        &mut self,
        entry: &AnnotatedSymbol,
        at: &AnnotatedSymbol,
        w: &Weight,
    ) -> Result<(), SolverError> {
        if w.is_zero() {
            return Ok(());
        }
        let slot = self
            .path
            .entry((entry.clone(), at.clone()))
            .or_default();
        if slot.combine_in_place(w) {
            if slot.len() > self.opts.tuple_cap {
                return Err(crate::weights::WeightError::TupleCapExceeded {
                    size: slot.len(),
                    cap: self.opts.tuple_cap,
                }
                .into());
            }
            self.enqueue(Item::Path(entry.clone(), at.clone()));
        }
        Ok(())
    }

    fn add_summary(&mut self, entry: &AnnotatedSymbol, w: &Weight) -> Result<(), SolverError> {
        if w.is_zero() {
            return Ok(());
        }
        let slot = self.summary.entry(entry.clone()).or_default();
        if slot.combine_in_place(w) {
            if slot.len() > self.opts.tuple_cap {
                return Err(crate::weights::WeightError::TupleCapExceeded {
                    size: slot.len(),
                    cap: self.opts.tuple_cap,
                }
                .into());
            }
            self.enqueue(Item::Summary(entry.clone()));
        }
        Ok(())
    }

    fn run(&mut self) -> Result<(), SolverError> {
        let start = self.red.start();
        self.add_path(&start, &start, &Weight::one())?;
        let cap = self.opts.tuple_cap;
        while let Some(item) = self.queue.pop_front() {
            self.queued.remove(&item);
            self.iterations += 1;
            if self.iterations > self.opts.iteration_cap {
                return Err(SolverError::IterationCap {
                    cap: self.opts.iteration_cap,
                });
            }
            match item {
                Item::Path(entry, at) => {
                    let v = self.path[&(entry.clone(), at.clone())].clone();
                    for (rule, rhs) in self.red.successors(&at) {
                        let w = &self.red.system().rules()[rule].weight;
                        let vw = v.extend_capped(w, cap)?;
                        match rhs.as_slice() {
                            [] => self.add_summary(&entry, &vw)?,
                            [next] => self.add_path(&entry, next, &vw)?,
                            [callee, ret] => {
                                let record = CallRecord {
                                    entry: entry.clone(),
                                    at: at.clone(),
                                    rule,
                                    ret: ret.clone(),
                                };
                                self.callers
                                    .entry(callee.clone())
                                    .or_default()
                                    .insert(record);
                                self.add_path(callee, callee, &Weight::one())?;
                                if let Some(s) = self.summary.get(callee).cloned() {
                                    let through = vw.extend_capped(&s, cap)?;
                                    self.add_path(&entry, ret, &through)?;
                                }
                            }
                            _ => unreachable!(),
                        }
                    }
                }
                Item::Summary(callee) => {
                    let s = self.summary[&callee].clone();
                    let records: Vec<CallRecord> = self
                        .callers
                        .get(&callee)
                        .map(|c| c.iter().cloned().collect())
                        .unwrap_or_default();
                    for rec in records {
                        let v = self.path[&(rec.entry.clone(), rec.at.clone())].clone();
                        let w = &self.red.system().rules()[rec.rule].weight;
                        let through = v.extend_capped(w, cap)?.extend_capped(&s, cap)?;
                        self.add_path(&rec.entry, &rec.ret, &through)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Weight of reaching each entry (freshly pushed) from the start symbol.
    fn reach(&mut self) -> Result<HashMap<AnnotatedSymbol, Weight>, SolverError> {
        let cap = self.opts.tuple_cap;
        let mut outgoing: HashMap<AnnotatedSymbol, Vec<(AnnotatedSymbol, &CallRecord)>> =
            HashMap::new();
        for (callee, recs) in &self.callers {
            for rec in recs {
                outgoing
                    .entry(rec.entry.clone())
                    .or_default()
                    .push((callee.clone(), rec));
            }
        }
        let start = self.red.start();
        let mut reach: HashMap<AnnotatedSymbol, Weight> = HashMap::new();
        reach.insert(start.clone(), Weight::one());
        let mut queue = VecDeque::from([start]);
        let mut queued: HashSet<AnnotatedSymbol> = queue.iter().cloned().collect();
        while let Some(entry) = queue.pop_front() {
            queued.remove(&entry);
            self.iterations += 1;
            if self.iterations > self.opts.iteration_cap {
                return Err(SolverError::IterationCap {
                    cap: self.opts.iteration_cap,
                });
            }
            let r = reach[&entry].clone();
            let Some(outs) = outgoing.get(&entry) else {
                continue;
            };
            for (callee, rec) in outs {
                let v = &self.path[&(rec.entry.clone(), rec.at.clone())];
                let w = &self.red.system().rules()[rec.rule].weight;
                let add = r.extend_capped(v, cap)?.extend_capped(w, cap)?;
                let slot = reach.entry(callee.clone()).or_default();
                if slot.combine_in_place(&add) {
                    if slot.len() > cap {
                        return Err(crate::weights::WeightError::TupleCapExceeded {
                            size: slot.len(),
                            cap,
                        }
                        .into());
                    }
                    if queued.insert(callee.clone()) {
                        queue.push_back(callee.clone());
                    }
                }
            }
        }
        Ok(reach)
    }
}

/// Combined weight of all derivations from the start configuration to any
/// configuration whose top symbol satisfies `target`. ZERO iff none exists.
pub fn movp<F>(sys: &CWPDSystem, target: F, opts: SolverOptions) -> Result<Weight, SolverError>
where
    F: Fn(&StackSymbol) -> bool,
{
    movp_with_stats(sys, target, opts).map(|(w, _)| w)
}

pub fn movp_with_stats<F>(
    sys: &CWPDSystem,
    target: F,
    opts: SolverOptions,
) -> Result<(Weight, MovpStats), SolverError>
where
    F: Fn(&StackSymbol) -> bool,
{
    let mut sat = Saturation::new(sys, opts);
    sat.run()?;
    let reach = sat.reach()?;
    let mut result = Weight::zero();
    for ((entry, at), w) in &sat.path {
        if !target(&at.base) {
            continue;
        }
        if let Some(r) = reach.get(entry) {
            result.combine_in_place(&r.extend_capped(w, opts.tuple_cap)?);
            if result.len() > opts.tuple_cap {
                return Err(crate::weights::WeightError::TupleCapExceeded {
                    size: result.len(),
                    cap: opts.tuple_cap,
                }
                .into());
            }
        }
    }
    let entries: BTreeSet<&AnnotatedSymbol> = sat.path.keys().map(|(e, _)| e).collect();
    let stats = MovpStats {
        entries: entries.len(),
        path_edges: sat.path.len(),
        iterations: sat.iterations,
    };
    Ok((result, stats))
}
