use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dqcc_core::fixtures::{three_chip_share, THREE_CHIP_SHARE_KINDS};
use dqcc_core::schedule::Schedule;
use serde_json::Value;

fn athena(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_athena"))
        .args(args)
        .env("ATHENA_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = athena(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stats(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("stats.json")).unwrap()).unwrap()
}

fn generated(dir: &Path, family: &str, qubits: &str) -> std::path::PathBuf {
    let c = dir.join(format!("{family}.json"));
    ok(&[
        "generate",
        "--family",
        family,
        "--qubits",
        qubits,
        "--seed",
        "3",
        "--out",
        s(&c),
    ]);
    c
}

#[test]
fn compile_writes_artifacts_that_revalidate() {
    let tmp = tempfile::tempdir().unwrap();
    let c = generated(tmp.path(), "qft-like", "12");
    let out = tmp.path().join("out");
    let blocks = tmp.path().join("blocks.json");
    let trace = tmp.path().join("ums.jsonl");
    let layout = tmp.path().join("layout.json");
    let errors = tmp.path().join("errors.toml");
    fs::write(&errors, "eps_relocate = 0.05\n").unwrap();
    #[rustfmt::skip]
    ok(&[
        "compile", "--circuit", s(&c), "--mapper", "mincut", "--scheduler", "ums", "--beam", "8",
        "--window", "2", "--alpha", "1.77", "--beta", "0.871", "--ees", "--epr-hide", "1.0",
        "--seed", "7", "--out-dir", s(&out), "--dump-blocks", s(&blocks), "--trace", s(&trace),
        "--dump-layout", s(&layout), "--errors", s(&errors),
    ]);
    for f in ["schedule.json", "stats.json", "gantt.csv", "fidelity.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let st = stats(&out);
    assert_eq!(st["schema"], 1);
    assert_eq!(st["scheduler"], "ums");
    assert_eq!(st["epr_hide"], 1.0);
    assert_eq!(st["params"]["beam"], 8);
    let sched = Schedule::from_json(&fs::read_to_string(out.join("schedule.json")).unwrap()).unwrap();
    let gantt = fs::read_to_string(out.join("gantt.csv")).unwrap();
    assert_eq!(gantt.lines().count(), sched.len() + 1);
    let records = fs::read_to_string(&trace).unwrap();
    assert!(records
        .lines()
        .all(|l| serde_json::from_str::<Value>(l).unwrap()["costs"].is_array()));
    let b: Value = serde_json::from_str(&fs::read_to_string(&blocks).unwrap()).unwrap();
    assert_eq!(
        b["blocks"].as_array().unwrap().len(),
        st["blocks"].as_u64().unwrap() as usize
    );
    let l: Value = serde_json::from_str(&fs::read_to_string(&layout).unwrap()).unwrap();
    assert_eq!(l["qubits"].as_array().unwrap().len(), 12);
    let v = ok(&[
        "validate",
        "--schedule",
        s(&out.join("schedule.json")),
        "--circuit",
        s(&c),
    ]);
    assert!(v.starts_with("ok"));
}

#[test]
fn share_fixture_walkthrough_with_blockgreedy() {
    let tmp = tempfile::tempdir().unwrap();
    let (dag, _, topo) = three_chip_share();
    let c = tmp.path().join("share.json");
    let a = tmp.path().join("line.json");
    fs::write(&c, dag.to_json()).unwrap();
    fs::write(&a, serde_json::to_string(&topo.to_config()).unwrap()).unwrap();
    let out = tmp.path().join("out");
    #[rustfmt::skip]
    ok(&[
        "compile", "--circuit", s(&c), "--arch", s(&a), "--mapper", "trivial",
        "--scheduler", "blockgreedy", "--out-dir", s(&out),
    ]);
    let sched = Schedule::from_json(&fs::read_to_string(out.join("schedule.json")).unwrap()).unwrap();
    assert_eq!(sched.kind_string(), THREE_CHIP_SHARE_KINDS);
    assert_eq!(stats(&out)["metrics"]["t_eff"], 4.0);
}

#[test]
fn ees_toggle_keeps_teff() {
    let tmp = tempfile::tempdir().unwrap();
    let c = generated(tmp.path(), "qaoa-3reg", "16");
    let (on, off) = (tmp.path().join("on"), tmp.path().join("off"));
    ok(&[
        "compile",
        "--circuit",
        s(&c),
        "--no-ees",
        "--seed",
        "2",
        "--out-dir",
        s(&off),
    ]);
    ok(&[
        "compile",
        "--circuit",
        s(&c),
        "--no-ees",
        "--ees",
        "--seed",
        "2",
        "--out-dir",
        s(&on),
    ]);
    let (a, b) = (stats(&on), stats(&off));
    assert_eq!(a["ees"], true);
    assert_eq!(b["ees"], false);
    assert_eq!(a["metrics"]["t_eff"], b["metrics"]["t_eff"]);
    assert!(a["metrics"]["makespan_ns"].as_u64() <= b["metrics"]["makespan_ns"].as_u64());
}

#[test]
fn same_flags_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let c = generated(tmp.path(), "qv-like", "12");
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        ok(&["compile", "--circuit", s(&c), "--seed", "5", "--out-dir", s(d)]);
    }
    for f in ["schedule.json", "stats.json", "gantt.csv"] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn validate_rejects_a_tampered_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let c = generated(tmp.path(), "qaoa-3reg", "24");
    let out = tmp.path().join("out");
    ok(&["compile", "--circuit", s(&c), "--out-dir", s(&out)]);
    let good = Schedule::from_json(&fs::read_to_string(out.join("schedule.json")).unwrap()).unwrap();
    let kept: Vec<_> = good
        .instructions
        .iter()
        .filter(|i| i.kind != dqcc_core::schedule::InstrKind::Relocate)
        .cloned()
        .collect();
    assert!(kept.len() < good.len());
    let sched = Schedule::new(good.initial.clone(), kept);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, sched.to_json()).unwrap();
    let r = athena(&["validate", "--schedule", s(&bad), "--circuit", s(&c)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("violation"));
}

#[test]
fn bench_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    let header = ok(&["bench", "--suite", s(&empty), "--format", "csv"]);
    assert_eq!(header.lines().count(), 1);
    assert!(header.starts_with("benchmark,scheduler,"));

    let suite = tmp.path().join("suite.toml");
    fs::write(
        &suite,
        "[params]\nbeam = 4\n[[instance]]\nfamily = \"qaoa-3reg\"\nqubits = [12]\n\
         [[instance]]\nfamily = \"qft-like\"\nqubits = [10]\n[[instance]]\nfamily = \"qv-like\"\nqubits = [8]\n",
    )
    .unwrap();
    let table = tmp.path().join("t.md");
    ok(&["bench", "--suite", s(&suite), "--out", s(&table)]);
    let md = fs::read_to_string(&table).unwrap();
    assert_eq!(md.lines().count(), 2 + 9 + 3);
    assert_eq!(md.lines().filter(|l| l.starts_with("| relative |")).count(), 3);
}

#[test]
fn oracle_reports_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let (dag, _, topo) = three_chip_share();
    let c = tmp.path().join("share.json");
    let a = tmp.path().join("line.toml");
    fs::write(&c, dag.to_json()).unwrap();
    fs::write(&a, toml::to_string(&topo.to_config()).unwrap()).unwrap();
    let text = ok(&["oracle", "--circuit", s(&c), "--arch", s(&a), "--mapper", "trivial"]);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("optimum t_eff "), "{first}");
    for name in ["ums", "blockgreedy", "pergate"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        let gap: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(gap >= 0.0, "{line}");
    }
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let r = athena(&["compile", "--circuit", s(&missing)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.json"));
    let r = athena(&[
        "generate",
        "--family",
        "qaoa-3reg",
        "--qubits",
        "9",
        "--out",
        s(&missing),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let r = Command::new(env!("CARGO_BIN_EXE_athena"))
        .args(["generate", "--family", "bv-like", "--qubits", "6", "--out", s(&missing)])
        .env("ATHENA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
}
