use std::collections::BTreeSet;

use stackpolicy::cwpds::{RuleKind, SolverOptions};
use stackpolicy::model::{parse_model, write_model};
use stackpolicy::oracle::{self, DEFAULT_BOUND};
use stackpolicy::permgen::generate_permissions;
use stackpolicy::policygen::{emit_policy, encode, generate_policy, parse_table_policy, PolicyFormat};
use stackpolicy::samples::{socket_logging, SOCKET_LOGGING};
use stackpolicy::MethodId;

/// `levels` layers of two methods each, fully connected layer to layer, so
/// the number of distinct call histories doubles per layer.
fn diamond_model(levels: usize) -> String {
    let mut s = String::from("method s entry\nmethod z\nmethod chk check\nmethod prv priv\n");
    for i in 0..levels {
        s += &format!("method x{i}\nmethod y{i}\n");
    }
    let mut id = 0;
    let mut edge = |s: &mut String, from: &str, line: usize, to: &str| {
        id += 1;
        *s += &format!("calledge {id} {from} {line} {to} ctx=any\n");
    };
    edge(&mut s, "s", 1, "x0");
    edge(&mut s, "s", 2, "y0");
    for i in 0..levels {
        let next = |n: &str| if i + 1 == levels { "z".to_string() } else { format!("{n}{}", i + 1) };
        for src in ["x", "y"] {
            edge(&mut s, &format!("{src}{i}"), 1, &next("x"));
            if i + 1 < levels {
                edge(&mut s, &format!("{src}{i}"), 2, &next("y"));
            }
        }
    }
    edge(&mut s, "z", 2, "chk");
    s += "depnode dz z 1 kind=alloc form=3 type=AllPermission\n";
    s += "depnode dc z 2 kind=callsite\n";
    s += "depedge dz dc\n";
    s += "checkarg z:2 var=p\n";
    s += "pta p@z = {(AllPermission, dz, {})}\n";
    s
}

#[test]
fn dump_shows_gated_check_push() {
    let sys = encode(&socket_logging()).unwrap();
    let dump = sys.dump();
    assert!(
        dump.lines().any(|l| l == "checkConnect:5 --[any]--> checkConnect@5 ; 1"),
        "{dump}"
    );
}

#[test]
fn sample_encodes_to_expected_rule_shapes() {
    let sys = encode(&socket_logging()).unwrap();
    let count = |k| sys.rules().iter().filter(|r| r.kind() == k).count();
    assert_eq!(count(RuleKind::Push), 10);
    assert_eq!(count(RuleKind::Pop), 1);
    assert_eq!(count(RuleKind::Swap), 1);
}

#[test]
fn valid_paths_of_the_sample() {
    let m = socket_logging();
    let g = &m.graph;
    let ids = |paths: Vec<oracle::CallPath>| -> BTreeSet<Vec<String>> {
        paths.iter().map(|p| p.edge_ids(g)).collect()
    };
    let to_check = ids(oracle::enum_vpaths(&m, &g.check_node, DEFAULT_BOUND));
    let want: BTreeSet<Vec<String>> = [
        vec!["1", "3", "6"],
        vec!["2", "4", "6"],
        vec!["8", "9", "10"],
    ]
    .iter()
    .map(|p| p.iter().map(|s| s.to_string()).collect())
    .collect();
    assert_eq!(to_check, want);
    // Every truncated path carries a prefix that reaches the privileged node.
    for p in oracle::enum_vpaths(&m, &g.check_node, DEFAULT_BOUND) {
        if p.truncated {
            assert_eq!(p.prefix.len(), 3, "{p:?}");
        }
    }
}

#[test]
fn socket_value_matches_both_caller_paths() {
    let m = socket_logging();
    let g = &m.graph;
    let dp = oracle::dpaths(&m, "d6", DEFAULT_BOUND);
    let from_alloc: Vec<_> = dp.iter().filter(|p| p.start == "d12").collect();
    assert_eq!(from_alloc.len(), 1);
    assert_eq!(from_alloc[0].nodes(&m), vec!["d12", "d13", "d5", "d6"]);
    let matched: BTreeSet<Vec<String>> = oracle::match_paths(&m, from_alloc[0], DEFAULT_BOUND)
        .iter()
        .map(|p| p.edge_ids(g))
        .collect();
    let want: BTreeSet<Vec<String>> = [["1", "3", "5"], ["2", "4", "5"]]
        .iter()
        .map(|p| p.iter().map(|s| s.to_string()).collect())
        .collect();
    assert_eq!(matched, want);
}

#[test]
fn oracle_and_engine_agree_on_sample() {
    let m = socket_logging();
    let perms = generate_permissions(&m).unwrap();
    let (engine, _) = generate_policy(&m, &perms, SolverOptions::default()).unwrap();
    assert_eq!(engine.grants, oracle::oracle_policy(&m, &perms, DEFAULT_BOUND).grants);
    assert!(!engine.permissions_of(&MethodId::new("n_priv")).iter().any(|_| true));
}

#[test]
fn tuple_cap_is_reported() {
    let m = parse_model(&diamond_model(8)).unwrap();
    let perms = generate_permissions(&m).unwrap();
    let opts = SolverOptions {
        tuple_cap: 100,
        ..SolverOptions::default()
    };
    let err = generate_policy(&m, &perms, opts).unwrap_err();
    assert!(stackpolicy::Error::from(err).is_resource_limit());
    // The same shape at a small depth is fine.
    let m = parse_model(&diamond_model(3)).unwrap();
    let perms = generate_permissions(&m).unwrap();
    let (policy, w) = generate_policy(&m, &perms, SolverOptions::default()).unwrap();
    assert_eq!(w.len(), 8);
    assert!(policy.holds(&MethodId::new("x2"), perms.perms.iter().next().unwrap()));
}

#[test]
fn sample_model_round_trips() {
    let m = parse_model(SOCKET_LOGGING).unwrap();
    let text = write_model(&m);
    let again = parse_model(&text).unwrap();
    assert_eq!(write_model(&again), text);
    assert_eq!(again.graph, m.graph);
    assert_eq!(again.dep, m.dep);
}

#[test]
fn emitted_table_parses_back() {
    let m = socket_logging();
    let perms = generate_permissions(&m).unwrap();
    let (policy, _) = generate_policy(&m, &perms, SolverOptions::default()).unwrap();
    let table = emit_policy(&policy, PolicyFormat::Table);
    assert_eq!(table.lines().count(), 8);
    assert_eq!(parse_table_policy(&table).unwrap().grants, policy.grants);
    let java = emit_policy(&policy, PolicyFormat::Java);
    assert!(java.starts_with("grant codeBase "), "{java}");
}
