mod common;

use std::collections::BTreeSet;

use stratos::model::*;
use stratos::relations::{dependency_closure, non_selfsourcing_for_source, selfsourcing_for_source, type_status, uses};

fn oracle_uses(w: &WorldState, u: &UnitId, s: &SourceId) -> bool {
    w.use_relations.iter().filter(|r| &r.user == u && &r.source == s).any(|r| w.themes[&r.theme].maintainer == *u)
}

fn owns(w: &WorldState, u: &UnitId, s: &SourceId) -> bool {
    w.sources[s].owner == *u
}

/// The sources of type `tau` used by `u`, each paired with whether `u` owns it.
fn used_of_type(w: &WorldState, u: &UnitId, tau: &SourceTypeId) -> Vec<bool> {
    w.sources
        .keys()
        .filter(|s| &w.sources[*s].source_type == tau && oracle_uses(w, u, s))
        .map(|s| owns(w, u, s))
        .collect()
}

/// Fixpoint over the symmetric dependency relation by repeated passes.
fn oracle_closure(w: &WorldState, s: &SourceId) -> BTreeSet<SourceId> {
    let mut set = BTreeSet::from([s.clone()]);
    loop {
        let before = set.len();
        for src in w.sources.values() {
            for dep in &src.depends_on {
                if set.contains(&src.id) || set.contains(dep) {
                    set.insert(src.id.clone());
                    set.insert(dep.clone());
                }
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

fn check_against_oracle(w: &WorldState) -> usize {
    let mut checks = 0;
    for u in w.units.keys() {
        for s in w.sources.keys() {
            let used = oracle_uses(w, u, s);
            assert_eq!(uses(w, u, s).unwrap(), used);
            assert_eq!(selfsourcing_for_source(w, u, s).unwrap(), used && owns(w, u, s));
            assert_eq!(non_selfsourcing_for_source(w, u, s).unwrap(), used && !owns(w, u, s));
            checks += 3;
        }
        for tau in w.source_types.keys() {
            let used = used_of_type(w, u, tau);
            let t = type_status(w, u, tau).unwrap();
            assert_eq!(t.selfsourcing_type, !used.is_empty() && used.iter().all(|o| *o));
            assert_eq!(t.partial_selfsourcing_type, used.iter().any(|o| *o));
            assert_eq!(t.non_selfsourcing_type, !used.is_empty() && used.iter().all(|o| !*o));
            assert_eq!(t.partial_non_selfsourcing_type, used.iter().any(|o| !*o));
            checks += 4;
        }
    }
    for s in w.sources.keys() {
        assert_eq!(dependency_closure(w, s).unwrap(), oracle_closure(w, s));
    }
    checks
}

#[test]
fn predicates_agree_with_brute_force_on_random_states() {
    let mut rng = common::rng(0x5eed_0001);
    let checks: usize = (0..1000).map(|_| check_against_oracle(&common::random_state(&mut rng))).sum();
    assert!(checks > 10_000);
}

#[test]
fn predicates_agree_on_larger_states() {
    let mut rng = common::rng(0x5eed_0002);
    let mut sizes = BTreeSet::new();
    for _ in 0..300 {
        let w = common::random_state_sized(&mut rng, 6, 12);
        sizes.insert((w.units.len(), w.sources.len()));
        check_against_oracle(&w);
    }
    assert!(sizes.iter().any(|(u, s)| *u == 6 && *s >= 10));
}

#[test]
fn non_selfsourcing_for_type_implies_partial_non_selfsourcing() {
    let mut rng = common::rng(7);
    for _ in 0..300 {
        let w = common::random_state(&mut rng);
        for u in w.units.keys() {
            for tau in w.source_types.keys() {
                let t = type_status(&w, u, tau).unwrap();
                if t.non_selfsourcing_type {
                    assert!(t.partial_non_selfsourcing_type);
                }
                if t.selfsourcing_type {
                    assert!(t.partial_selfsourcing_type);
                }
            }
        }
    }
}

#[test]
fn unknown_entities_are_reported() {
    let mut w = WorldState::new();
    w.add_unit(Unit::new("U"));
    let err = uses(&w, &UnitId::from("U"), &SourceId::from("S")).unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_ENTITY");
    let err = type_status(&w, &UnitId::from("V"), &SourceTypeId::from("X")).unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_ENTITY");
}
