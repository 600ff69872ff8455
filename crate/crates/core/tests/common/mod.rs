//! Shared generators and reference computations for integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use stackpolicy::contexts::{CtxFamily, CtxSet};
use stackpolicy::cwpds::{CWPDSystem, CondRule, Condition, StackSymbol};
use stackpolicy::model::{
    compute_phi_meth, AllocForm, CallEdge, CallGraph, DepKind, InterKind, MethodRoles, ModelBuilder,
    ProgramModel, PtaObject,
};
use stackpolicy::weights::{KillSet, Weight, WeightTuple};
use stackpolicy::{CallSite, MethodId};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn m(name: &str) -> MethodId {
    MethodId::new(name)
}

/// Random model from a class on which path enumeration and the pushdown
/// engine are expected to agree exactly:
///
/// * the call graph is acyclic;
/// * methods that check permissions call nothing but the check method and at
///   most one factory;
/// * a factory is a leaf with a single caller and returns its permission to
///   that call site;
/// * calls into the check method are unconditional, and every other edge
///   condition is drawn from contexts of its caller.
pub fn random_model(seed: u64) -> ProgramModel {
    let mut r = rng(seed);
    let ordinary = ["s", "a1", "p", "a2"];
    let checkers: Vec<&str> = {
        let mut pool = vec!["s", "a1", "a2"];
        pool.shuffle(&mut r);
        pool.truncate(r.gen_range(1..=2));
        pool
    };
    let is_checker = |n: &str| checkers.contains(&n);

    // Ordinary forward edges; checkers are sinks among ordinary methods.
    let mut raw: Vec<(String, String)> = Vec::new();
    for i in 0..ordinary.len() {
        for j in i + 1..ordinary.len() {
            if !is_checker(ordinary[i]) && r.gen_bool(0.5) {
                raw.push((ordinary[i].into(), ordinary[j].into()));
            }
        }
    }
    for (j, callee) in ordinary.iter().enumerate().skip(1) {
        if raw.iter().any(|(_, c)| c == callee) {
            continue;
        }
        let callers: Vec<&str> = ordinary[..j]
            .iter()
            .copied()
            .filter(|c| !is_checker(c))
            .collect();
        if let Some(c) = callers.choose(&mut r) {
            raw.push((c.to_string(), callee.to_string()));
        }
    }
    if !raw.is_empty() && r.gen_bool(0.25) {
        let dup = raw[r.gen_range(0..raw.len())].clone();
        raw.push(dup);
    }
    raw.shuffle(&mut r);

    let check_count = if checkers.len() == 1 && r.gen_bool(0.3) { 2 } else { checkers.len() };
    let mut check_callers: Vec<&str> = checkers.clone();
    if check_count == 2 && checkers.len() == 1 {
        check_callers.push(checkers[0]);
    }
    let factory_for = if r.gen_bool(0.5) {
        Some(r.gen_range(0..check_callers.len()))
    } else {
        None
    };
    let budget = 8 - check_callers.len() - usize::from(factory_for.is_some());
    raw.truncate(budget);

    let mut next_line: BTreeMap<String, u32> = BTreeMap::new();
    let mut line_for = |caller: &str| {
        let l = next_line.entry(caller.to_string()).or_insert(0);
        *l += 1;
        *l
    };
    struct Proto {
        caller: String,
        site: CallSite,
        callee: String,
    }
    let mut protos: Vec<Proto> = raw
        .iter()
        .map(|(c, d)| Proto {
            caller: c.clone(),
            site: CallSite::new(c.as_str(), line_for(c)),
            callee: d.clone(),
        })
        .collect();
    let mut check_sites = Vec::new();
    for c in &check_callers {
        let site = CallSite::new(*c, line_for(c));
        check_sites.push(site.clone());
        protos.push(Proto {
            caller: c.to_string(),
            site,
            callee: "chk".into(),
        });
    }
    let mut factory_site = None;
    if let Some(k) = factory_for {
        let c = check_sites[k].method.to_string();
        let site = CallSite::new(c.as_str(), line_for(&c));
        factory_site = Some(site.clone());
        protos.push(Proto {
            caller: c,
            site,
            callee: "f".into(),
        });
    }

    // Contexts do not depend on edge conditions, so compute them first.
    let mut nodes: BTreeSet<MethodId> = ["s", "a1", "a2", "p", "chk", "f"].iter().map(|n| m(n)).collect();
    nodes.retain(|n| n.as_str() != "f" || factory_site.is_some());
    let skeleton = CallGraph {
        nodes,
        edges: protos
            .iter()
            .enumerate()
            .map(|(i, p)| CallEdge {
                id: format!("e{i}"),
                caller: m(&p.caller),
                site: p.site.clone(),
                callee: m(&p.callee),
                ctx: CtxFamily::unconditional(),
            })
            .collect(),
        entry: m("s"),
        check_node: m("chk"),
        priv_node: m("p"),
    };
    let phi = compute_phi_meth(&skeleton);
    let ctx_of = |name: &str| phi.get(&m(name)).cloned().unwrap_or_default();

    let mut b = ModelBuilder::new();
    let roles = |entry, check, privileged| MethodRoles {
        entry,
        check,
        privileged,
    };
    b.method("s", roles(true, false, false), None).unwrap();
    b.method("a1", roles(false, false, false), Some("lib".into())).unwrap();
    b.method("a2", roles(false, false, false), Some("lib".into())).unwrap();
    b.method("p", roles(false, false, true), None).unwrap();
    b.method("chk", roles(false, true, false), None).unwrap();
    if factory_site.is_some() {
        b.method("f", roles(false, false, false), None).unwrap();
    }
    for e in &skeleton.edges {
        let ctx = if e.callee.as_str() == "chk" || r.gen_bool(0.5) {
            CtxFamily::unconditional()
        } else {
            let contexts: Vec<CtxSet> = ctx_of(e.caller.as_str()).iter().cloned().collect();
            let mut fam = CtxFamily::none();
            for _ in 0..r.gen_range(1..=2) {
                if let Some(c) = contexts.choose(&mut r) {
                    fam.insert(c.iter().filter(|_| r.gen_bool(0.7)).cloned().collect());
                }
            }
            if fam.is_empty() {
                CtxFamily::unconditional()
            } else {
                fam
            }
        };
        b.call_edge(e.id.clone(), e.caller.clone(), e.site.clone(), e.callee.clone(), ctx)
            .unwrap();
    }

    let types = ["FilePermission", "SocketPermission", "RuntimePermission"];
    for (i, k) in check_sites.iter().enumerate() {
        let cm = k.method.as_str();
        let var = format!("v{i}");
        b.dep_node(format!("k{i}"), cm, k.line, DepKind::CallSite).unwrap();
        let fed_by_factory = factory_for == Some(i);
        let (alloc_method, alloc_line) = if fed_by_factory { ("f", 10 + 2 * i as u32) } else { (cm, 100 + i as u32) };
        let form = [AllocForm::TargetAction, AllocForm::Target, AllocForm::NoArgs][r.gen_range(0..3)];
        let ptype = types[r.gen_range(0..types.len())].to_string();
        let (target, action) = match form {
            AllocForm::TargetAction => (Some(format!("t{i}")), Some(format!("x{i}"))),
            AllocForm::Target => (Some(format!("t{i}")), None),
            AllocForm::NoArgs => (None, None),
        };
        b.dep_node(
            format!("a{i}"),
            alloc_method,
            alloc_line,
            DepKind::Alloc {
                form,
                ptype: ptype.clone(),
                target: target.clone(),
                action: action.clone(),
            },
        )
        .unwrap();
        if fed_by_factory {
            let fs = factory_site.clone().unwrap();
            b.dep_node(format!("r{i}"), "f", alloc_line + 1, DepKind::Return).unwrap();
            b.dep_node(format!("x{i}"), cm, fs.line, DepKind::CallSite).unwrap();
            b.dep_edge(format!("a{i}"), format!("r{i}"), InterKind::None).unwrap();
            b.dep_edge(format!("r{i}"), format!("x{i}"), InterKind::Return).unwrap();
            b.dep_edge(format!("x{i}"), format!("k{i}"), InterKind::None).unwrap();
        } else {
            b.dep_edge(format!("a{i}"), format!("k{i}"), InterKind::None).unwrap();
        }
        b.check_arg(k.clone(), var.clone()).unwrap();
        let objs: Vec<PtaObject> = ctx_of(cm)
            .iter()
            .map(|c| PtaObject {
                ptype: ptype.clone(),
                alloc: format!("a{i}"),
                ctx: c.clone(),
            })
            .collect();
        b.pta(var, cm, objs).unwrap();
        let alloc_ctx: Vec<CtxSet> = ctx_of(alloc_method).iter().cloned().collect();
        if let Some(t) = target {
            let vals: Vec<(String, CtxSet)> = alloc_ctx
                .iter()
                .map(|c| (["x.txt", "y.txt"][r.gen_range(0..2)].to_string(), c.clone()))
                .collect();
            b.sa(t, alloc_method, vals).unwrap();
        }
        if let Some(a) = action {
            let mut vals: Vec<(String, CtxSet)> = Vec::new();
            for c in &alloc_ctx {
                if r.gen_bool(0.85) {
                    vals.push((["read", "write"][r.gen_range(0..2)].to_string(), c.clone()));
                }
            }
            b.sa(a, alloc_method, vals).unwrap();
        }
    }
    b.build().expect("generated model is well formed")
}

/// Random small weight: ≤3 tuples over ≤4 methods and ≤4 sites.
pub fn random_weight(r: &mut StdRng) -> Weight {
    let methods = ["m0", "m1", "m2", "m3"];
    let sites: Vec<CallSite> = (1..=4).map(|l| CallSite::new("m0", l)).collect();
    let pick_methods = |r: &mut StdRng| -> BTreeSet<MethodId> {
        methods.iter().filter(|_| r.gen_bool(0.35)).map(|n| m(n)).collect()
    };
    let n = r.gen_range(0..=3);
    let mut w = Weight::zero();
    for _ in 0..n {
        let kill = if r.gen_bool(0.15) {
            KillSet::All
        } else {
            KillSet::Methods(pick_methods(r))
        };
        let t = WeightTuple {
            kill,
            gen: pick_methods(r),
            finished: pick_methods(r),
            history: sites.iter().filter(|_| r.gen_bool(0.35)).cloned().collect(),
        };
        w.combine_in_place(&Weight::from_tuple(t));
    }
    if r.gen_bool(0.1) {
        w = Weight::one();
    }
    w
}

/// Random conditional system over a handful of methods and sites.
pub fn random_system(r: &mut StdRng) -> CWPDSystem {
    let methods: Vec<MethodId> = (0..4).map(|i| m(&format!("q{i}"))).collect();
    let sites: Vec<CallSite> = (1..=4).map(|l| CallSite::new("q0", l)).collect();
    let sym = |r: &mut StdRng| -> StackSymbol {
        if r.gen_bool(0.7) {
            StackSymbol::Method(methods[r.gen_range(0..methods.len())].clone())
        } else {
            StackSymbol::Site(sites[r.gen_range(0..sites.len())].clone())
        }
    };
    let mut rules = Vec::new();
    for _ in 0..r.gen_range(3..=9) {
        let lhs = sym(r);
        let cond = if r.gen_bool(0.4) {
            Condition::Any
        } else {
            let fam: CtxFamily = (0..r.gen_range(1..=2))
                .map(|_| sites.iter().filter(|_| r.gen_bool(0.4)).cloned().collect::<CtxSet>())
                .collect();
            Condition::from_family(&fam)
        };
        let rhs = match r.gen_range(0..3) {
            0 => vec![],
            1 => vec![sym(r)],
            _ => vec![
                StackSymbol::Method(methods[r.gen_range(0..methods.len())].clone()),
                StackSymbol::Site(sites[r.gen_range(0..sites.len())].clone()),
            ],
        };
        rules.push(CondRule {
            lhs,
            cond,
            rhs,
            weight: random_weight(r),
        });
    }
    CWPDSystem::new(StackSymbol::Method(methods[0].clone()), rules).unwrap()
}

/// Meet over all rule sequences of length ≤ `max_len` from the start
/// configuration to a configuration whose top satisfies `target`, under the
/// conditional semantics directly on stack words.
pub fn brute_movp(sys: &CWPDSystem, target: &dyn Fn(&StackSymbol) -> bool, max_len: usize) -> Weight {
    let mut acc = Weight::zero();
    // Frontier of (stack, weight) pairs; identical pairs are merged.
    let mut frontier: BTreeSet<(Vec<StackSymbol>, Weight)> =
        BTreeSet::from([(vec![sys.start().clone()], Weight::one())]);
    for step in 0..=max_len {
        let mut next = BTreeSet::new();
        for (stack, w) in &frontier {
            if stack.last().is_some_and(target) {
                acc.combine_in_place(w);
            }
            if step == max_len {
                continue;
            }
            for idx in sys.applicable(stack) {
                let mut s = stack.clone();
                sys.apply(&mut s, idx);
                next.insert((s, w.extend(&sys.rules()[idx].weight)));
            }
        }
        frontier = next;
    }
    acc
}
