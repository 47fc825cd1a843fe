mod common;

use std::collections::BTreeSet;

use stratos::dsl;
use stratos::model::*;
use stratos::patterns::{abstract_pattern, instantiate, Binding, Bindings};

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

fn names(sm: &Sourcement) -> Vec<String> {
    let mut names: BTreeSet<String> = sm.basics.iter().map(|b| b.owner.to_string()).collect();
    names.extend(sm.all_sources().iter().map(|s| s.to_string()));
    names.extend(sm.attributes.source_refs().flat_map(|(_, r)| r.iter().map(|s| s.to_string())));
    names.remove(sm.principal.as_str());
    names.into_iter().collect()
}

/// Abstract over every subset of at most three names and instantiate with
/// the original names; returns how many subsets were checked.
fn round_trip(world: &WorldState, sm: &Sourcement) -> usize {
    let subsets = subsets_up_to(&names(sm), 3);
    for vary in &subsets {
        let pattern = abstract_pattern(world, "P", sm, vary).unwrap();
        assert!(pattern.variables.len() >= vary.len());
        let back = instantiate(&pattern, &pattern.origin_bindings()).unwrap();
        assert_eq!(fingerprint_of(&back), fingerprint_of(sm), "vary {vary:?} of {}", sm.id);
    }
    subsets.len()
}

#[test]
fn corpus_sourcements_round_trip() {
    let mut checked = 0;
    let mut sourcements = 0;
    for path in common::corpus_files("") {
        let Ok(scenario) = dsl::parse(&std::fs::read_to_string(&path).unwrap()) else { continue };
        for sm in scenario.world.sourcements.values() {
            sourcements += 1;
            checked += round_trip(&scenario.world, sm);
        }
    }
    assert!(sourcements >= 2);
    assert!(checked > sourcements);
}

#[test]
fn generated_sourcements_round_trip() {
    let mut rng = common::rng(2024);
    let mut sourcements = 0;
    for _ in 0..300 {
        let w = common::random_state(&mut rng);
        for sm in w.sourcements.values() {
            sourcements += 1;
            round_trip(&w, sm);
        }
    }
    assert!(sourcements > 100);
}

#[test]
fn renaming_substitutes_every_occurrence() {
    let mut rng = common::rng(5);
    for _ in 0..200 {
        let w = common::random_state(&mut rng);
        for sm in w.sourcements.values() {
            let Some(first) = sm.all_sources().into_iter().next() else { continue };
            let vary = BTreeSet::from([first.to_string()]);
            let pattern = abstract_pattern(&w, "P", sm, &vary).unwrap();
            let var = &pattern.variables[0].name;
            let bindings: Bindings = [(var.clone(), Binding::Source(SourceId::from("Fresh")))].into();
            let closed = instantiate(&pattern, &bindings).unwrap();
            let sources = closed.all_sources();
            assert!(sources.contains(&SourceId::from("Fresh")));
            assert!(!sources.contains(&first));
            assert_eq!(sources.len(), sm.all_sources().len());
        }
    }
}

#[test]
fn principal_cannot_be_varied_and_bindings_must_be_total() {
    let scenario = dsl::parse(
        "unit U {}\nunit V {}\nsource_type X singleton=false\nsource S : X owned_by V\ntheme T by U\nuse U S for T\n\
         sourcement Sm principal=U themes=[T] { basic [S] }\n",
    )
    .unwrap();
    let sm = &scenario.world.sourcements[&SourcementId::from("Sm")];
    let err = abstract_pattern(&scenario.world, "P", sm, &BTreeSet::from(["U".to_owned()])).unwrap_err();
    assert_eq!(err.code(), "PRINCIPAL_NOT_ABSTRACTABLE");
    let pattern =
        abstract_pattern(&scenario.world, "P", sm, &BTreeSet::from(["V".to_owned(), "S".to_owned()])).unwrap();
    let err = instantiate(&pattern, &Bindings::new()).unwrap_err();
    assert_eq!(err.code(), "UNBOUND_VARIABLE");
    let wrong: Bindings =
        pattern.variables.iter().map(|v| (v.name.clone(), Binding::Unit(UnitId::from("W")))).collect();
    assert_eq!(instantiate(&pattern, &wrong).unwrap_err().code(), "SORT_MISMATCH");
}
