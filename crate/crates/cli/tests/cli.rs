use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stratos::dsl;
use stratos::runner::{self, RunOptions};

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn stratos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratos")).args(args).env("STRATOS_COLOR", "0").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let clean = corpus("consequences/01_outsource_non_selfsourcing.srcm");
    let o = stratos(&["check", path_str(&clean)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(": ok"));

    let o = stratos(&["check", "-q", path_str(&clean)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty() && o.stderr.is_empty());

    let bad = corpus("invalid/business_refs_contract.srcm");
    let o = stratos(&["check", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[STRATIFICATION_VIOLATION]"), "{}", stderr(&o));

    let o = stratos(&["check", "/nonexistent/file.srcm"]);
    assert_eq!(o.status.code(), Some(2));

    let o = stratos(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnostics_name_the_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.srcm");
    std::fs::write(&file, "unit U {}\ntheme T by Nobody\n").unwrap();
    let o = stratos(&["check", path_str(&file)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:2:12: error[UNRESOLVED_REF]", file.display())), "{err}");
}

#[test]
fn run_passes_and_fails() {
    let o = stratos(&["run", path_str(&corpus("consequences/06_outsource_then_backsource.srcm"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains(": ok, 2 step(s)"), "{}", stdout(&o));

    let o = stratos(&["run", path_str(&corpus("failing/backsource_after_type.srcm"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error["), "{}", stderr(&o));
}

#[test]
fn run_json_is_the_library_report() {
    let path = corpus("scenarios/housing.srcm");
    let o = stratos(&["run", "--json", path_str(&path)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.ends_with('\n'));
    let scenario = dsl::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mut report = runner::run(&scenario, RunOptions::default());
    report.scenario = path.display().to_string();
    assert_eq!(out.trim_end(), serde_json::to_string(&report).unwrap());
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(value["success"], true);
}

#[test]
fn runs_are_deterministic() {
    let path = corpus("scenarios/machine.srcm");
    let a = stratos(&["run", "--json", "--trace", path_str(&path)]);
    let b = stratos(&["run", "--json", "--trace", path_str(&path)]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn query_prints_values() {
    let path = corpus("consequences/06_outsource_then_backsource.srcm");
    let o = stratos(&["query", path_str(&path), "selfsourcing", "U", "S"]);
    assert_eq!(stdout(&o).trim(), "true");
    let o = stratos(&["query", "--after", path_str(&path), "owner", "S"]);
    assert_eq!(stdout(&o).trim(), "U");
    let o = stratos(&["query", "--json", path_str(&path), "non_selfsourcing", "V", "S"]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(value["value"], serde_json::json!({"bool": false}));
    assert_eq!(value["query"]["query"], "non_selfsourcing");
    let o = stratos(&["query", path_str(&path), "frobnicate", "S"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn score_reads_json_and_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.json");
    std::fs::write(
        &file,
        r#"{"service_contracted": true, "sources_transferred": true, "initial_production_by_transferred_sources": true, "service_volume": 1, "transferred_production_volume": 1}"#,
    )
    .unwrap();
    let o = stratos(&["score", "--input", path_str(&file)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("value 7/10\n"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("rule4")), "{out}");

    let o = stratos(&["score", "--input", path_str(&corpus("scenarios/douts.srcm")), "--id", "Ideal"]);
    assert!(stdout(&o).starts_with("value 1\n"), "{}", stdout(&o));
    let o = stratos(&["score", "--input", path_str(&corpus("scenarios/douts.srcm")), "--id", "ServiceOnly"]);
    assert!(stdout(&o).starts_with("value 0\n"), "{}", stdout(&o));
}

#[test]
fn classify_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let pre = dir.path().join("pre.srcm");
    let post = dir.path().join("post.srcm");
    let base = "unit U {}\nunit V {}\nsource_type X singleton=false\ntheme T by U\n";
    std::fs::write(&pre, format!("{base}source S : X owned_by U\nuse U S for T\n")).unwrap();
    std::fs::write(
        &post,
        format!("{base}source S : X owned_by V\nuse U S for T\ncontract C provider=V consumer=U theme=T period=(0, 10) notice=1\n"),
    )
    .unwrap();
    let o = stratos(&["classify", "--pre", path_str(&pre), "--post", path_str(&post), "--unit", "U"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = dsl::parse(&std::fs::read_to_string(&pre).unwrap()).unwrap().world;
    let b = dsl::parse(&std::fs::read_to_string(&post).unwrap()).unwrap().world;
    let expected = stratos::transformations::classify(&a, &b, &"U".into()).unwrap();
    let tags: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(tags, expected.tags().iter().map(|t| t.to_string()).collect::<Vec<_>>());
    assert!(tags.iter().any(|t| t == "outsource"), "{tags:?}");
}

#[test]
fn plans_round_trip_through_verify() {
    let path = corpus("consequences/06_outsource_then_backsource.srcm");
    let dir = tempfile::tempdir().unwrap();
    for item in ["1", "2"] {
        let o = stratos(&["plan", "--json", path_str(&path), "--item", item]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let plan_file = dir.path().join(format!("plan{item}.json"));
        std::fs::write(&plan_file, &o.stdout).unwrap();
        let o = stratos(&["verify", path_str(&path), "--plan", path_str(&plan_file), "--item", item]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), "valid");
    }
    let plan_file = dir.path().join("plan1.json");
    let o = stratos(&["verify", path_str(&path), "--plan", path_str(&plan_file), "--item", "2"]);
    assert_eq!(o.status.code(), Some(1));

    let o = stratos(&["plan", path_str(&path)]);
    let out = stdout(&o);
    assert!(out.starts_with("pre  "));
    assert!(out.contains("step transfer_ownership"), "{out}");
}

#[test]
fn match_ranks_bids() {
    let o = stratos(&["match", path_str(&corpus("scenarios/tender.srcm")), "--lot", "L"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let order: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(order, ["Good", "Wide", "Wrong"]);
    assert!(out.lines().all(|l| !l.ends_with(' ')));
    let o = stratos(&["match", "--json", path_str(&corpus("scenarios/tender.srcm")), "--lot", "L"]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(value["rule"], stratos::patterns::RANKING_RULE);
}

#[test]
fn color_can_be_disabled() {
    let o = stratos(&["check", path_str(&corpus("invalid/fact_refs_business.srcm"))]);
    assert!(!o.stderr.contains(&0x1b));
    assert!(!o.stdout.contains(&0x1b));
}
