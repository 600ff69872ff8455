use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stackpolicy::samples::SOCKET_LOGGING;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackpolicy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Layers of two methods, fully connected, ending in one checkpoint: the
/// number of call histories doubles per layer.
fn diamond_model(levels: usize) -> String {
    let mut out = String::from("method s entry\nmethod z\nmethod chk check\nmethod prv priv\n");
    for i in 0..levels {
        out += &format!("method x{i}\nmethod y{i}\n");
    }
    let mut edges = vec![("s".to_string(), 1, "x0".to_string()), ("s".to_string(), 2, "y0".to_string())];
    for i in 0..levels {
        for src in ["x", "y"] {
            if i + 1 == levels {
                edges.push((format!("{src}{i}"), 1, "z".into()));
            } else {
                edges.push((format!("{src}{i}"), 1, format!("x{}", i + 1)));
                edges.push((format!("{src}{i}"), 2, format!("y{}", i + 1)));
            }
        }
    }
    edges.push(("z".into(), 2, "chk".into()));
    for (id, (from, line, to)) in edges.iter().enumerate() {
        out += &format!("calledge {} {from} {line} {to} ctx=any\n", id + 1);
    }
    out += "depnode dz z 1 kind=alloc form=3 type=AllPermission\n";
    out += "depnode dc z 2 kind=callsite\n";
    out += "depedge dz dc\n";
    out += "checkarg z:2 var=p\n";
    out += "pta p@z = {(AllPermission, dz, {})}\n";
    out
}

#[test]
fn analyze_writes_the_table_policy() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.model", SOCKET_LOGGING);
    let out = dir.path().join("policy.txt");
    let o = run(&["analyze", s(&model), "--emit", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 8);
    let methods: std::collections::BTreeSet<&str> = text
        .lines()
        .map(|l| l.trim_start_matches("method ").split(':').next().unwrap())
        .collect();
    assert_eq!(
        methods,
        ["Priv.run", "checkAccess", "checkConnect", "connectFaculty", "connectStudent", "s"]
            .into_iter()
            .collect()
    );
    let err = stderr(&o);
    assert!(err.contains("tuples: 4"), "{err}");
    assert_eq!(err.lines().filter(|l| l.starts_with("permission ")).count(), 3);
}

#[test]
fn analyze_java_format() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.model", SOCKET_LOGGING);
    let o = run(&["analyze", s(&model), "--format", "java"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("grant codeBase "), "{}", stdout(&o));
    let o = run(&["analyze", s(&model), "--format", "xml"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn unreadable_model_exits_one() {
    let o = run(&["analyze", "/nonexistent/model"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn malformed_model_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.model", "method s entry\ncalledge 1 s 1 nowhere ctx=any\n");
    let o = run(&["dump", s(&model)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn tuple_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "diamond.model", &diamond_model(8));
    let o = run(&["analyze", s(&model), "--tuple-cap", "100"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = run(&["analyze", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("tuples: 256"));
}

#[test]
fn check_round_trip_and_deficit() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.model", SOCKET_LOGGING);
    let gen = stdout(&run(&["analyze", s(&model)]));
    let full = write(dir.path(), "full.txt", &gen);
    let o = run(&["check", s(&model), "--policy", s(&full)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "PASS\n");

    let dropped = "method checkAccess: FilePermission(\"C:/log.txt\",\"write\")";
    let less: String = gen.lines().filter(|l| *l != dropped).map(|l| format!("{l}\n")).collect();
    assert_eq!(less.lines().count(), 7);
    let less = write(dir.path(), "less.txt", &less);
    let o = run(&["check", s(&model), "--policy", s(&less)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stdout(&o), format!("FAIL\nmissing: {dropped}\n"));

    let more = write(dir.path(), "more.txt", &format!("{gen}method n_priv: AllPermission\n"));
    let o = run(&["check", s(&model), "--policy", s(&more)]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("note: 1 grant(s) exceed"), "{}", stderr(&o));

    let junk = write(dir.path(), "junk.txt", "grant everything\n");
    assert_eq!(code(&run(&["check", s(&model), "--policy", s(&junk)])), 1);
}

#[test]
fn oracle_compare_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.model", SOCKET_LOGGING);
    let o = run(&["oracle", s(&model), "--compare"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 8);
    assert_eq!(code(&run(&["oracle", s(&model), "--bound", "0"])), 1);
}

#[test]
fn tightened_edge_shrinks_both_policies_alike() {
    let dir = tempfile::tempdir().unwrap();
    // The faculty route into checkConnect now requires a site it never passes.
    let tightened = SOCKET_LOGGING.replace(
        "calledge 3 connectFaculty 30 checkConnect ctx=any",
        "calledge 3 connectFaculty 30 checkConnect ctx={s:2}",
    );
    assert_ne!(tightened, SOCKET_LOGGING);
    let model = write(dir.path(), "t.model", &tightened);
    let o = run(&["oracle", s(&model), "--compare"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let original = write(dir.path(), "m.model", SOCKET_LOGGING);
    let before = stdout(&run(&["analyze", s(&original)]));
    let after = stdout(&run(&["analyze", s(&model)]));
    assert!(after.lines().count() < before.lines().count(), "{after}");
    assert!(after.lines().all(|l| before.contains(l)));
}

#[test]
fn dump_is_stable_and_shows_check_push() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.model", SOCKET_LOGGING);
    let a = run(&["dump", s(&model)]);
    let b = run(&["dump", s(&model)]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("checkConnect:5 --[any]--> checkConnect@5 ; 1\n"), "{text}");
    assert!(text.contains("[contexts]\n") && text.contains("[checkpoints]\ncheckAccess:24\ncheckConnect:6\n"));
}

#[test]
fn dump_without_edges_has_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "e.model", "method s entry\nmethod c check\nmethod p priv\n");
    let o = run(&["dump", s(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "[contexts]\ns: {{}}\n[checkpoints]\n");
}
