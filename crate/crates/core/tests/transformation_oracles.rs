mod common;

use std::collections::BTreeMap;

use stratos::model::validate_state;
use stratos::transformations::{apply, classify, TransformationKind as Kind};
use stratos::transitions::{apply_plan, plan_with_log, verify_plan_with_log};

const STATES: usize = 220;

fn coverage(cases: &[(common::Context, stratos::transformations::TransformationSpec)]) -> BTreeMap<Kind, usize> {
    let mut by_kind = BTreeMap::new();
    for (_, spec) in cases {
        *by_kind.entry(spec.kind).or_insert(0) += 1;
    }
    by_kind
}

#[test]
fn generated_corpus_exercises_every_kind() {
    let cases = common::applicable_cases(42, STATES);
    let by_kind = coverage(&cases);
    for kind in Kind::ALL {
        assert!(by_kind.get(&kind).copied().unwrap_or(0) > 0, "no applicable case for {kind}: {by_kind:?}");
    }
}

#[test]
fn classify_contains_the_applied_kind() {
    let cases = common::applicable_cases(42, STATES);
    assert!(!cases.is_empty());
    for (ctx, spec) in &cases {
        let (post, _) = apply(&ctx.state, spec, &ctx.log).unwrap();
        let kinds = classify(&ctx.state, &post, &spec.actor).unwrap();
        assert!(kinds.contains(spec.kind), "{} not in {:?} for {spec:?}", spec.kind, kinds.tags());
    }
}

#[test]
fn plans_verify_and_pass_through_valid_states() {
    let cases = common::applicable_cases(42, STATES);
    for (ctx, spec) in &cases {
        let plan = plan_with_log(&ctx.state, spec, &ctx.log).unwrap();
        let verification = verify_plan_with_log(&ctx.state, &plan, spec, &ctx.log);
        assert!(verification.valid, "{spec:?}: {:?}", verification.diagnostics);
        let states = apply_plan(&ctx.state, &plan).unwrap();
        assert_eq!(states.len(), plan.steps.len() + 1);
        for s in &states {
            assert!(validate_state(s).is_empty());
        }
        let (post, _) = apply(&ctx.state, spec, &ctx.log).unwrap();
        assert!(states.last().unwrap().same_content(&post));
    }
}

#[test]
fn rejected_transformations_leave_no_plan() {
    let mut rng = common::rng(99);
    for _ in 0..60 {
        let state = common::random_state(&mut rng);
        let log = stratos::model::HistoryLog::new();
        for spec in common::candidate_specs(&state) {
            if let Err(e) = apply(&state, &spec, &log) {
                let planned = plan_with_log(&state, &spec, &log).unwrap_err();
                assert_eq!(planned.code(), e.code());
            }
        }
    }
}
