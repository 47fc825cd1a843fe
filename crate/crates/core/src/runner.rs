//! Scenario execution: runs the script of a parsed scenario against its
//! world, evaluating inline assertions against the state current at each
//! point.

use serde::{Deserialize, Serialize};

use crate::douts::{format_rational, parse_rational, score};
use crate::dsl::{script_item, Assertion, Expectation, Query, Scenario, ScriptAction, TypeFlag, Value};
use crate::error::Error;
use crate::model::*;
use crate::patterns::{select_fit, validate_bid};
use crate::relations;
use crate::transformations::{apply, classify, classify_commitments, provenance, service_characteristic, Provenance};
use crate::transitions::execute_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Continue past failed transformations and steps.
    pub keep_going: bool,
}

/// A script item that did not behave as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub line: u32,
    pub item: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub line: u32,
    pub op: String,
    pub digest: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub steps_executed: usize,
    pub assertions_passed: usize,
    /// Failed assertions, unmet `expect=` clauses, and rejected
    /// transformations or steps. Empty iff the run succeeded.
    pub assertions_failed: Vec<Failure>,
    /// Script items not reached after a fail-fast stop.
    pub items_skipped: usize,
    pub initial_digest: Fingerprint,
    pub final_digest: Fingerprint,
    pub trace: Vec<TraceEntry>,
    pub diagnostics: Vec<Diagnostic>,
    pub success: bool,
}

/// States reached so far (index 0 is the initial world) and the event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub states: Vec<WorldState>,
    pub log: HistoryLog,
}

impl History {
    pub fn new(initial: WorldState) -> Self {
        Self { states: vec![initial], log: HistoryLog::new() }
    }

    pub fn current(&self) -> &WorldState {
        self.states.last().expect("history starts with the initial state")
    }
}

pub fn run(scenario: &Scenario, options: RunOptions) -> RunReport {
    let mut history = History::new(scenario.world.clone());
    let mut report = RunReport {
        scenario: String::new(),
        steps_executed: 0,
        assertions_passed: 0,
        assertions_failed: Vec::new(),
        items_skipped: 0,
        initial_digest: fingerprint(&scenario.world),
        final_digest: fingerprint(&scenario.world),
        trace: Vec::new(),
        diagnostics: advisories(&scenario.world),
        success: false,
    };
    for (index, item) in scenario.script.iter().enumerate() {
        let line = item.span.line;
        let failure =
            |expected: String, actual: String| Failure { line, item: script_item(&item.action), expected, actual };
        let outcome = match &item.action {
            ScriptAction::Assert(a) => {
                let (ok, actual) = check(scenario, &history, a);
                if ok {
                    report.assertions_passed += 1;
                } else {
                    report.assertions_failed.push(failure(a.expectation.to_string(), actual.to_string()));
                }
                continue;
            }
            ScriptAction::Apply { spec, expect } => {
                let result = apply(history.current(), spec, &history.log);
                (spec.kind.tag().to_owned(), result, expect)
            }
            ScriptAction::Step { step, expect } => {
                let result = execute_step(history.current(), step, &history.log);
                (step.op().to_owned(), result, expect)
            }
        };
        let (op, result, expect) = outcome;
        let stop = match (result, expect) {
            (Ok((next, log)), expect) => {
                report.steps_executed += 1;
                report.trace.push(TraceEntry { line, op, digest: fingerprint(&next) });
                history.states.push(next);
                history.log = log;
                match expect {
                    Some(code) => {
                        report.assertions_failed.push(failure(format!("rejection with {code}"), "success".into()));
                        true
                    }
                    None => false,
                }
            }
            (Err(e), Some(code)) if matches_code(&e, code) => {
                report.assertions_passed += 1;
                false
            }
            (Err(e), expect) => {
                let expected = expect.as_ref().map_or("success".to_owned(), |c| format!("rejection with {c}"));
                report.assertions_failed.push(failure(expected, describe_error(&e)));
                true
            }
        };
        if stop && !options.keep_going {
            report.items_skipped = scenario.script.len() - index - 1;
            break;
        }
    }
    report.final_digest = fingerprint(history.current());
    report.success = report.assertions_failed.is_empty();
    report
}

fn matches_code(e: &Error, code: &str) -> bool {
    e.code() == code || e.detail_code() == Some(code)
}

fn describe_error(e: &Error) -> String {
    match e.detail_code() {
        Some(detail) => format!("{} {detail}: {e}", e.code()),
        None => format!("{}: {e}", e.code()),
    }
}

fn error_value(e: Error) -> Value {
    Value::Word(e.code().to_owned())
}

fn provenance_value(p: Provenance) -> Value {
    let mut out = vec![p.tag().to_owned()];
    match p {
        Provenance::InsourcedFrom(u)
        | Provenance::OutsourcedTo(u)
        | Provenance::DevelopedInProviderNeverOutsourced(u) => out.push(u.to_string()),
        Provenance::FollowUpOutsourcedByThird(a, b) | Provenance::FollowUpOutsourcedTo(a, b) => {
            out.extend([a.to_string(), b.to_string()])
        }
        Provenance::DevelopedThenChained(chain) => out.extend(chain.iter().map(|u| u.to_string())),
        Provenance::DevelopedInsideNeverOutsourced | Provenance::Backsourced => {}
    }
    Value::List(out)
}

fn bool_or<E: Into<Error>>(r: Result<bool, E>) -> Value {
    match r {
        Ok(b) => Value::Bool(b),
        Err(e) => error_value(e.into()),
    }
}

fn transition(history: &History, range: Option<crate::dsl::StateRange>) -> Result<(&WorldState, &WorldState), Value> {
    let n = history.states.len();
    let (from, to) = match range {
        Some(r) => (r.from, r.to),
        None if n >= 2 => (n - 2, n - 1),
        None => return Err(Value::Word("NO_TRANSITION".into())),
    };
    match (history.states.get(from), history.states.get(to)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Value::Word("INVALID_STATE_INDEX".into())),
    }
}

/// Whether the query's result is a set, so list order is irrelevant.
fn is_set_valued(query: &Query) -> bool {
    matches!(query, Query::Classify { .. } | Query::Closure { .. } | Query::Contracts { .. })
}

/// Evaluate a query against the current point of a run.
pub fn evaluate(scenario: &Scenario, history: &History, query: &Query) -> Value {
    let state = history.current();
    match query {
        Query::Uses { unit, source } => bool_or(relations::uses(state, unit, source)),
        Query::Selfsourcing { unit, source } => bool_or(relations::selfsourcing_for_source(state, unit, source)),
        Query::NonSelfsourcing { unit, source } => bool_or(relations::non_selfsourcing_for_source(state, unit, source)),
        Query::TypeStatus { unit, source_type } => match relations::type_status(state, unit, source_type) {
            Ok(t) => Value::Word(t.status.tag().to_owned()),
            Err(e) => error_value(e),
        },
        Query::TypeFlag { flag, unit, source_type } => match relations::type_status(state, unit, source_type) {
            Ok(t) => Value::Bool(match flag {
                TypeFlag::SelfsourcingType => t.selfsourcing_type,
                TypeFlag::PartialSelfsourcingType => t.partial_selfsourcing_type,
                TypeFlag::NonSelfsourcingType => t.non_selfsourcing_type,
                TypeFlag::PartialNonSelfsourcingType => t.partial_non_selfsourcing_type,
            }),
            Err(e) => error_value(e),
        },
        Query::Closure { source } => match relations::dependency_closure(state, source) {
            Ok(c) => Value::List(c.iter().map(|s| s.to_string()).collect()),
            Err(e) => error_value(e),
        },
        Query::Owner { source } => match state.owner_of(source) {
            Some(u) => Value::Word(u.to_string()),
            None => Value::Word("UNKNOWN_ENTITY".into()),
        },
        Query::Maintainer { theme } => match state.themes.get(theme) {
            Some(t) => Value::Word(t.maintainer.to_string()),
            None => Value::Word("UNKNOWN_ENTITY".into()),
        },
        Query::Contracts { unit } => Value::List(
            state
                .contracts
                .values()
                .filter(|c| &c.provider == unit || &c.consumer == unit)
                .map(|c| c.id.to_string())
                .collect(),
        ),
        Query::Classify { unit, states } => match transition(history, *states) {
            Ok((pre, post)) => match classify(pre, post, unit) {
                Ok(r) => Value::List(r.tags().into_iter().map(str::to_owned).collect()),
                Err(e) => error_value(e),
            },
            Err(v) => v,
        },
        Query::Commitments { unit, states } => match transition(history, *states) {
            Ok((pre, post)) => match classify_commitments(pre, post, unit) {
                Ok(c) => Value::Word(c.tag().to_owned()),
                Err(e) => error_value(e),
            },
            Err(v) => v,
        },
        Query::Service { contract } => match service_characteristic(state, contract) {
            Ok(c) => Value::Word(c.tag().to_owned()),
            Err(e) => error_value(e),
        },
        Query::Provenance { unit, source } => match provenance(&history.log, state, unit, source) {
            Ok(p) => provenance_value(p),
            Err(e) => error_value(e),
        },
        Query::Douts { id } => match scenario.douts_input(id).map(score) {
            Some(Ok(s)) => Value::Word(format_rational(&s.value)),
            Some(Err(e)) => error_value(e),
            None => Value::Word("UNKNOWN_ENTITY".into()),
        },
        Query::Fit { lot } => match scenario.lot(lot) {
            Some(lot) => {
                let ranking = select_fit(&lot, &scenario.bids_on(&lot.id), state);
                Value::List(ranking.ranked.iter().filter(|r| r.valid).map(|r| r.bid.id.clone()).collect())
            }
            None => Value::Word("UNKNOWN_ENTITY".into()),
        },
        Query::BidValid { bid } => {
            let found = scenario.bids.iter().find(|b| &b.id == bid);
            match found.and_then(|b| scenario.lot(&b.lot).map(|l| (b, l))) {
                Some((b, lot)) => Value::Bool(validate_bid(&lot, b, state).is_empty()),
                None => Value::Word("UNKNOWN_ENTITY".into()),
            }
        }
        Query::Valid => Value::Bool(validate_state(state).is_empty()),
    }
}

fn normalize(query: &Query, value: &Value) -> Value {
    match value {
        Value::List(items) if is_set_valued(query) => {
            let mut items = items.clone();
            items.sort();
            items.dedup();
            Value::List(items)
        }
        other => other.clone(),
    }
}

fn equal(query: &Query, actual: &Value, expected: &Value) -> bool {
    if let (Query::Douts { .. }, Value::Word(a), Value::Word(b)) = (query, actual, expected) {
        if let (Ok(a), Ok(b)) = (parse_rational(a), parse_rational(b)) {
            return a == b;
        }
    }
    normalize(query, actual) == normalize(query, expected)
}

/// Evaluate an assertion; returns whether it holds and the actual value.
pub fn check(scenario: &Scenario, history: &History, assertion: &Assertion) -> (bool, Value) {
    let actual = evaluate(scenario, history, &assertion.query);
    let ok = match &assertion.expectation {
        Expectation::Equals(v) => equal(&assertion.query, &actual, v),
        Expectation::NotEquals(v) => !equal(&assertion.query, &actual, v),
        Expectation::Contains(w) => match &actual {
            Value::List(items) => items.contains(w),
            Value::Word(x) => x == w,
            Value::Bool(_) => false,
        },
        Expectation::Count(op, n) => match &actual {
            Value::List(items) => op.holds(items.len(), *n),
            _ => false,
        },
    };
    (ok, actual)
}
