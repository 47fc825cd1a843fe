//! One line per acceptance criterion. Run with `--nocapture` to see them.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::Rng;

use stratos::douts::{score, DoutsInput, LiftConditions, Rational};
use stratos::dsl::{self, Scenario};
use stratos::model::*;
use stratos::patterns::{abstract_pattern, instantiate};
use stratos::relations::{dependency_closure, non_selfsourcing_for_source, selfsourcing_for_source, type_status, uses};
use stratos::runner::{run, RunOptions};
use stratos::transformations::{apply, classify};
use stratos::transitions::{apply_plan, plan_with_log, verify_plan_with_log};

fn load(path: &std::path::Path) -> Scenario {
    dsl::parse(&std::fs::read_to_string(path).unwrap()).unwrap_or_else(|d| panic!("{}: {}", path.display(), d[0]))
}

fn consequences() {
    let files = common::corpus_files("consequences");
    assert_eq!(files.len(), 6);
    for path in files {
        let report = run(&load(&path), RunOptions::default());
        assert!(report.success, "{}: {:?}", path.display(), report.assertions_failed);
    }
}

fn douts_values() {
    let r = Ratio::new;
    let input = |lift: [bool; 5], vs: Rational| DoutsInput {
        service_contracted: true,
        sources_transferred: true,
        independent_markets_as_economic: false,
        initial_production_by_transferred_sources: true,
        lift_conditions: LiftConditions::from_array(lift),
        service_volume: vs,
        transferred_production_volume: r(1, 1),
        multi_party: false,
    };
    let value = |i: &DoutsInput| score(i).unwrap().value;

    let mut rule1 = input([true; 5], r(1, 1));
    rule1.sources_transferred = false;
    rule1.transferred_production_volume = r(0, 1);
    assert_eq!(value(&rule1), r(0, 1));
    let mut rule2 = input([true; 5], r(1, 1));
    rule2.independent_markets_as_economic = true;
    assert_eq!(value(&rule2), r(0, 1));
    assert_eq!(value(&input([false; 5], r(1, 1))), r(7, 10));
    assert_eq!(value(&input([true; 5], r(1, 1))), r(1, 1));

    let mut cases = 0;
    for mask in 0..32u8 {
        let lift: [bool; 5] = std::array::from_fn(|b| mask & (1 << b) != 0);
        for (n, d) in [(1, 4), (1, 2), (1, 1), (2, 1), (4, 1)] {
            cases += 1;
            let v = value(&input(lift, r(n, d)));
            assert!(v >= r(0, 1) && v <= r(1, 1));
            for b in (0..5).filter(|b| !lift[*b]) {
                let mut more = lift;
                more[b] = true;
                assert!(value(&input(more, r(n, d))) >= v);
            }
        }
    }
    assert_eq!(cases, 160);
}

fn classifier_soundness() {
    let cases = common::applicable_cases(42, 220);
    let states: BTreeSet<Fingerprint> = cases.iter().map(|(c, _)| fingerprint(&c.state)).collect();
    assert!(states.len() >= 200, "{} states", states.len());
    for (ctx, spec) in &cases {
        let (post, _) = apply(&ctx.state, spec, &ctx.log).unwrap();
        assert!(classify(&ctx.state, &post, &spec.actor).unwrap().contains(spec.kind), "{spec:?}");
    }
}

fn plan_equivalence() {
    for (ctx, spec) in common::applicable_cases(43, 220) {
        let plan = plan_with_log(&ctx.state, &spec, &ctx.log).unwrap();
        let v = verify_plan_with_log(&ctx.state, &plan, &spec, &ctx.log);
        assert!(v.valid, "{spec:?}: {:?}", v.diagnostics);
        let states = apply_plan(&ctx.state, &plan).unwrap();
        assert!(states.iter().all(|s| validate_state(s).is_empty()));
        let (post, _) = apply(&ctx.state, &spec, &ctx.log).unwrap();
        assert!(states.last().unwrap().same_content(&post));
    }
}

fn subsets_up_to(items: &[String], k: usize) -> Vec<BTreeSet<String>> {
    let mut out = vec![BTreeSet::new()];
    for item in items {
        let grown: Vec<_> = out
            .iter()
            .filter(|s| s.len() < k)
            .map(|s| {
                let mut s = s.clone();
                s.insert(item.clone());
                s
            })
            .collect();
        out.extend(grown);
    }
    out
}

fn pattern_round_trip() {
    let mut worlds: Vec<WorldState> = common::corpus_files("")
        .iter()
        .filter_map(|p| dsl::parse(&std::fs::read_to_string(p).unwrap()).ok())
        .map(|s| s.world)
        .collect();
    let mut rng = common::rng(2024);
    worlds.extend((0..200).map(|_| common::random_state(&mut rng)));
    let mut checked = 0;
    for w in &worlds {
        for sm in w.sourcements.values() {
            let mut names: BTreeSet<String> = sm.basics.iter().map(|b| b.owner.to_string()).collect();
            names.extend(sm.all_sources().iter().map(|s| s.to_string()));
            names.remove(sm.principal.as_str());
            for vary in subsets_up_to(&names.into_iter().collect::<Vec<_>>(), 3) {
                let pattern = abstract_pattern(w, "P", sm, &vary).unwrap();
                let back = instantiate(&pattern, &pattern.origin_bindings()).unwrap();
                assert_eq!(fingerprint_of(&back), fingerprint_of(sm));
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

fn relations_oracle() {
    let mut rng = common::rng(0x5eed_0001);
    for _ in 0..1000 {
        let w = common::random_state(&mut rng);
        let used = |u: &UnitId, s: &SourceId| {
            w.use_relations.iter().any(|r| &r.user == u && &r.source == s && w.themes[&r.theme].maintainer == *u)
        };
        for u in w.units.keys() {
            for s in w.sources.keys() {
                let own = w.sources[s].owner == *u;
                assert_eq!(uses(&w, u, s).unwrap(), used(u, s));
                assert_eq!(selfsourcing_for_source(&w, u, s).unwrap(), used(u, s) && own);
                assert_eq!(non_selfsourcing_for_source(&w, u, s).unwrap(), used(u, s) && !own);
            }
            for tau in w.source_types.keys() {
                let owned: Vec<bool> = w
                    .sources
                    .values()
                    .filter(|s| &s.source_type == tau && used(u, &s.id))
                    .map(|s| s.owner == *u)
                    .collect();
                let t = type_status(&w, u, tau).unwrap();
                assert_eq!(t.selfsourcing_type, !owned.is_empty() && owned.iter().all(|o| *o));
                assert_eq!(t.non_selfsourcing_type, !owned.is_empty() && owned.iter().all(|o| !*o));
                assert_eq!(t.partial_selfsourcing_type, owned.iter().any(|o| *o));
                assert_eq!(t.partial_non_selfsourcing_type, owned.iter().any(|o| !*o));
            }
        }
        for s in w.sources.keys() {
            let mut closure = BTreeSet::from([s.clone()]);
            loop {
                let before = closure.len();
                for src in w.sources.values() {
                    for dep in &src.depends_on {
                        if closure.contains(&src.id) || closure.contains(dep) {
                            closure.insert(src.id.clone());
                            closure.insert(dep.clone());
                        }
                    }
                }
                if closure.len() == before {
                    break;
                }
            }
            assert_eq!(dependency_closure(&w, s).unwrap(), closure);
        }
    }
}

fn dsl_round_trip_and_fuzz() {
    for sub in ["consequences", "scenarios", "failing"] {
        for path in common::corpus_files(sub) {
            let scenario = load(&path);
            let printed = dsl::print(&scenario);
            let reparsed = dsl::parse(&printed).unwrap();
            assert_eq!(reparsed.digest(), scenario.digest(), "{}", path.display());
            assert_eq!(dsl::print(&reparsed), printed);
        }
    }
    let mut rng = common::rng(0xacce);
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..256);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let survived = catch_unwind(|| match dsl::parse_bytes(&bytes) {
            Ok(s) => {
                run(&s, RunOptions { keep_going: true });
                true
            }
            Err(d) => !d.is_empty(),
        });
        if !matches!(survived, Ok(true)) {
            crashes += 1;
        }
    }
    std::panic::set_hook(hook);
    assert_eq!(crashes, 0);
}

fn stratification_negatives() {
    let files = common::corpus_files("invalid");
    assert_eq!(files.len(), 3);
    for path in files {
        let d = dsl::parse(&std::fs::read_to_string(&path).unwrap()).unwrap_err();
        assert!(d.iter().any(|d| d.code == "STRATIFICATION_VIOLATION"), "{}", path.display());
    }
}

type Criterion = (&'static str, fn(), Option<Duration>);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("consequence scenarios", consequences, Some(Duration::from_secs(1))),
        ("douts values and monotonicity", douts_values, Some(Duration::from_secs(1))),
        ("classifier soundness", classifier_soundness, Some(Duration::from_secs(30))),
        ("plan equivalence", plan_equivalence, Some(Duration::from_secs(30))),
        ("pattern round trip", pattern_round_trip, None),
        ("relations oracle", relations_oracle, None),
        ("dsl round trip and fuzz", dsl_round_trip_and_fuzz, None),
        ("stratification negatives", stratification_negatives, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let ok = outcome.is_ok() && in_time;
        let limit_text = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        let status = if ok { "PASS" } else { "FAIL" };
        println!("{status} {}. {name}: {:.3}s{limit_text}", i + 1, elapsed.as_secs_f64());
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
