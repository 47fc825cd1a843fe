mod common;

use std::path::Path;

use stratos::dsl::{self, Scenario};
use stratos::runner::{run, RunOptions};

fn load(path: &Path) -> Scenario {
    let text = std::fs::read_to_string(path).unwrap();
    dsl::parse(&text).unwrap_or_else(|d| panic!("{}: {}", path.display(), d[0]))
}

#[test]
fn corpus_round_trips_through_the_printer() {
    let mut files = common::corpus_files("consequences");
    files.extend(common::corpus_files("scenarios"));
    files.extend(common::corpus_files("failing"));
    assert!(files.len() >= 15);
    for path in files {
        let scenario = load(&path);
        let printed = dsl::print(&scenario);
        let reparsed =
            dsl::parse(&printed).unwrap_or_else(|d| panic!("{}: reprint fails: {}\n{printed}", path.display(), d[0]));
        assert_eq!(reparsed.digest(), scenario.digest(), "{}", path.display());
        assert_eq!(dsl::print(&reparsed), printed, "{} is not a fixpoint", path.display());
    }
}

#[test]
fn printed_output_uses_lf_and_sorted_declarations() {
    let scenario = dsl::parse("unit V {}\r\nunit U {}\r\ntheme T by U\r\n").unwrap();
    let printed = dsl::print(&scenario);
    assert!(!printed.contains('\r'));
    let u = printed.find("unit U").unwrap();
    let v = printed.find("unit V").unwrap();
    assert!(u < v);
}

#[test]
fn consequence_and_scenario_files_pass() {
    let mut files = common::corpus_files("consequences");
    files.extend(common::corpus_files("scenarios"));
    for path in files {
        let report = run(&load(&path), RunOptions::default());
        assert!(report.success, "{}: {:?}", path.display(), report.assertions_failed);
        assert!(report.assertions_passed > 0);
    }
}

#[test]
fn failing_files_fail() {
    for path in common::corpus_files("failing") {
        let report = run(&load(&path), RunOptions::default());
        assert!(!report.success, "{}", path.display());
    }
}

#[test]
fn invalid_files_violate_stratification() {
    let files = common::corpus_files("invalid");
    assert_eq!(files.len(), 3);
    for path in files {
        let diagnostics = dsl::parse(&std::fs::read_to_string(&path).unwrap()).unwrap_err();
        assert!(
            diagnostics.iter().any(|d| d.code == "STRATIFICATION_VIOLATION"),
            "{}: {diagnostics:?}",
            path.display()
        );
    }
}

#[test]
fn generated_worlds_round_trip() {
    let mut rng = common::rng(31);
    for _ in 0..300 {
        let scenario = Scenario { world: common::random_state(&mut rng), ..Scenario::default() };
        let printed = dsl::print(&scenario);
        let reparsed = dsl::parse(&printed).unwrap_or_else(|d| panic!("{}\n{printed}", d[0]));
        assert_eq!(reparsed.digest(), scenario.digest(), "{printed}");
    }
}
