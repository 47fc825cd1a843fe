mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use stratos::model::*;
use stratos::patterns::{abstract_pattern, select_fit, validate_bid, Bid, Binding, Bindings, Lot, Sort};
use stratos::relations::{non_selfsourcing_for_source, selfsourcing_for_source, type_status, uses};
use stratos::transformations::{apply, Subject, TransformationKind as Kind};
use stratos::transitions::{apply_step, check_lanes, plan_with_log};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn used_sources_are_exactly_one_of_self_or_non_selfsourcing(seed in any::<u64>()) {
        let w = common::random_state(&mut common::rng(seed));
        for u in w.units.keys() {
            for s in w.sources.keys() {
                let own = selfsourcing_for_source(&w, u, s).unwrap();
                let other = non_selfsourcing_for_source(&w, u, s).unwrap();
                prop_assert!(!(own && other));
                prop_assert_eq!(own || other, uses(&w, u, s).unwrap());
            }
        }
    }

    #[test]
    fn a_used_type_is_partially_self_or_partially_non_selfsourced(seed in any::<u64>()) {
        let w = common::random_state(&mut common::rng(seed));
        for u in w.units.keys() {
            for tau in w.source_types.keys() {
                let t = type_status(&w, u, tau).unwrap();
                let used = w.sources.values().any(|s| &s.source_type == tau && uses(&w, u, &s.id).unwrap());
                if used {
                    prop_assert!(t.partial_selfsourcing_type || t.partial_non_selfsourcing_type);
                } else {
                    prop_assert!(!t.partial_selfsourcing_type && !t.partial_non_selfsourcing_type);
                }
            }
        }
    }

    #[test]
    fn portfolios_are_coherent(seed in any::<u64>()) {
        let w = common::random_state(&mut common::rng(seed));
        for u in w.units.keys() {
            prop_assert!(SourcementPortfolio::of(&w, u).is_coherent());
        }
    }

    #[test]
    fn lot_namespaces_are_disjoint(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let w = common::random_state(&mut rng);
        let patterns: Vec<_> = w
            .sourcements
            .values()
            .map(|sm| abstract_pattern(&w, "P", sm, &vary_some(&mut rng, sm, 2)).unwrap())
            .collect();
        let lot = Lot { id: "L".into(), patterns: patterns.clone() };
        prop_assert!(lot.namespaces_disjoint());
        let doubled = Lot { id: "L".into(), patterns: [patterns.clone(), patterns].concat() };
        prop_assert!(doubled.namespaces_disjoint());
    }
}

fn vary_some(rng: &mut impl Rng, sm: &Sourcement, k: usize) -> BTreeSet<String> {
    let mut names: Vec<String> = sm.all_sources().iter().map(|s| s.to_string()).collect();
    names.extend(sm.basics.iter().map(|b| b.owner.to_string()).filter(|o| o != sm.principal.as_str()));
    names.sort();
    names.dedup();
    names.shuffle(rng);
    names.truncate(rng.gen_range(0..=k));
    names.into_iter().collect()
}

#[test]
fn transformations_conserve_sources_and_themes() {
    for (ctx, spec) in common::applicable_cases(11, 80) {
        let (post, _) = apply(&ctx.state, &spec, &ctx.log).unwrap();
        let delta = post.sources.len() as i64 - ctx.state.sources.len() as i64;
        let expected = match spec.kind {
            Kind::DevelopSource => 1,
            Kind::DropSource => -1,
            _ => 0,
        };
        assert_eq!(delta, expected, "{spec:?}");
        if !(spec.kind == Kind::Outsource && matches!(spec.subject, Subject::Theme(_))) {
            assert_eq!(post.themes, ctx.state.themes, "{spec:?}");
        }
    }
}

#[test]
fn backsourcing_undoes_an_outsourcing() {
    let mut checked = 0;
    for (ctx, spec) in common::applicable_cases(12, 80) {
        if spec.kind != Kind::Outsource || !spec.commitments_to_create.is_empty() {
            continue;
        }
        let Subject::Sources(sources) = &spec.subject else { continue };
        let (mid, log) = apply(&ctx.state, &spec, &ctx.log).unwrap();
        let back = stratos::transformations::TransformationSpec::new(
            Kind::Backsource,
            spec.actor.clone(),
            spec.subject.clone(),
        )
        .with_counterparties(spec.counterparties.clone());
        let (post, _) = apply(&mid, &back, &log).unwrap_or_else(|e| panic!("{e}: {spec:?}"));
        for s in sources {
            assert_eq!(post.owner_of(s), ctx.state.owner_of(s));
            for u in ctx.state.units.keys() {
                assert_eq!(uses(&post, u, s).unwrap(), uses(&ctx.state, u, s).unwrap());
            }
        }
        checked += 1;
    }
    assert!(checked > 20, "{checked}");
}

/// A random interleaving that keeps the order within each lane.
fn interleave(
    rng: &mut impl Rng,
    steps: &[stratos::transitions::PrimitiveStep],
) -> Vec<stratos::transitions::PrimitiveStep> {
    let mut lanes: BTreeMap<u32, std::collections::VecDeque<_>> = BTreeMap::new();
    for s in steps {
        lanes.entry(s.lane).or_default().push_back(s.clone());
    }
    let mut out = Vec::new();
    while !lanes.is_empty() {
        let keys: Vec<u32> = lanes.keys().copied().collect();
        let lane = keys[rng.gen_range(0..keys.len())];
        let queue = lanes.get_mut(&lane).unwrap();
        out.push(queue.pop_front().unwrap());
        if queue.is_empty() {
            lanes.remove(&lane);
        }
    }
    out
}

#[test]
fn lane_respecting_reorderings_reach_the_declared_post_state() {
    let mut rng = common::rng(13);
    let mut multi_lane = 0;
    for (ctx, spec) in common::applicable_cases(13, 80) {
        let plan = plan_with_log(&ctx.state, &spec, &ctx.log).unwrap();
        check_lanes(&ctx.state, &plan).unwrap();
        if plan.lanes().len() > 1 {
            multi_lane += 1;
        }
        for _ in 0..4 {
            let mut state = ctx.state.clone();
            for step in interleave(&mut rng, &plan.steps) {
                apply_step(&mut state, &step).unwrap_or_else(|d| panic!("{d}: {spec:?}"));
            }
            assert_eq!(fingerprint(&state), plan.declared_post, "{spec:?}");
        }
    }
    assert!(multi_lane > 0);
}

fn entity_pool(w: &WorldState) -> Vec<Binding> {
    let mut pool: Vec<Binding> = w.units.keys().map(|u| Binding::Unit(u.clone())).collect();
    pool.extend(w.sources.keys().map(|s| Binding::Source(s.clone())));
    pool.push(Binding::Unit(UnitId::from("Ghost")));
    pool.push(Binding::Source(SourceId::from("Phantom")));
    pool
}

fn binding_exists(w: &WorldState, b: &Binding) -> bool {
    match b {
        Binding::Unit(u) => w.units.contains_key(u),
        Binding::Source(s) => w.sources.contains_key(s),
    }
}

/// Whether a bid is acceptable, computed from the definitions alone.
fn oracle_valid(lot: &Lot, bid: &Bid, w: &WorldState) -> bool {
    if bid.lot != lot.id {
        return false;
    }
    let mut known = BTreeSet::new();
    for (i, p) in lot.patterns.iter().enumerate() {
        for v in &p.variables {
            let qualified = Lot::qualify(i, &v.name);
            let plain_unique =
                lot.patterns.iter().filter(|q| q.variables.iter().any(|x| x.name == v.name)).count() == 1;
            known.insert(qualified.clone());
            known.insert(v.name.clone());
            let binding = bid.bindings.get(&qualified).or(if plain_unique { bid.bindings.get(&v.name) } else { None });
            let Some(binding) = binding else { return false };
            let sort_ok =
                matches!((binding, v.sort), (Binding::Unit(_), Sort::UnitVar) | (Binding::Source(_), Sort::SourceVar));
            if !sort_ok || !binding_exists(w, binding) {
                return false;
            }
            if let Binding::Source(s) = binding {
                let source = &w.sources[s];
                for c in p.constraints.iter().filter(|c| c.variable == v.name) {
                    if c.source_type.as_ref().is_some_and(|t| t != &source.source_type) {
                        return false;
                    }
                    if c.singleton.is_some_and(|sg| w.source_types[&source.source_type].singleton != sg) {
                        return false;
                    }
                }
            }
        }
    }
    bid.bindings.keys().all(|k| known.contains(k)) && bid.offered_insourcing.iter().all(|s| w.sources.contains_key(s))
}

/// All total bindings of the lot's qualified variables over the pool.
fn all_bids(lot: &Lot, pool: &[Binding]) -> Vec<Bid> {
    let vars: Vec<String> = lot.variables().into_iter().map(|v| v.qualified).collect();
    let mut out = vec![Bindings::new()];
    for v in &vars {
        out = out
            .into_iter()
            .flat_map(|b| {
                pool.iter().map(move |e| {
                    let mut b = b.clone();
                    b.insert(v.clone(), e.clone());
                    b
                })
            })
            .collect();
    }
    out.into_iter()
        .enumerate()
        .map(|(i, bindings)| Bid {
            id: format!("B{i}"),
            lot: lot.id.clone(),
            bindings,
            offered_insourcing: BTreeSet::new(),
        })
        .collect()
}

#[test]
fn bid_validation_matches_brute_force() {
    let mut rng = common::rng(14);
    let (mut valid, mut invalid) = (0, 0);
    for _ in 0..150 {
        let w = common::random_state(&mut rng);
        let Some(sm) = w.sourcements.values().next() else { continue };
        let vary = vary_some(&mut rng, sm, 2);
        let pattern = abstract_pattern(&w, "P", sm, &vary).unwrap();
        let lot = Lot { id: "L".into(), patterns: vec![pattern] };
        let pool = entity_pool(&w);
        for mut bid in all_bids(&lot, &pool) {
            if rng.gen_bool(0.1) {
                bid.offered_insourcing.insert(SourceId::from(if rng.gen_bool(0.5) { "Phantom" } else { "S0" }));
            }
            if rng.gen_bool(0.05) {
                bid.bindings.insert("stray".into(), Binding::Unit(UnitId::from("U0")));
            }
            if rng.gen_bool(0.05) {
                bid.lot = "Other".into();
            }
            if rng.gen_bool(0.05) {
                let key = bid.bindings.keys().next().cloned();
                if let Some(key) = key {
                    bid.bindings.remove(&key);
                }
            }
            // Plain names are accepted when they are unique in the lot.
            if rng.gen_bool(0.3) {
                bid.bindings = bid
                    .bindings
                    .into_iter()
                    .map(|(k, v)| (k.split_once('.').map_or(k.clone(), |(_, n)| n.to_owned()), v))
                    .collect();
            }
            let expected = oracle_valid(&lot, &bid, &w);
            assert_eq!(validate_bid(&lot, &bid, &w).is_empty(), expected, "{bid:?}");
            if expected {
                valid += 1;
            } else {
                invalid += 1;
            }
        }
    }
    assert!(valid > 50 && invalid > 50, "{valid} valid, {invalid} invalid");
}

#[test]
fn ranking_puts_valid_bids_first_and_prefers_fewer_counterparties() {
    let mut rng = common::rng(15);
    for _ in 0..150 {
        let w = common::random_state(&mut rng);
        let Some(sm) = w.sourcements.values().next() else { continue };
        let pattern = abstract_pattern(&w, "P", sm, &vary_some(&mut rng, sm, 2)).unwrap();
        let lot = Lot { id: "L".into(), patterns: vec![pattern] };
        let mut bids = all_bids(&lot, &entity_pool(&w));
        bids.shuffle(&mut rng);
        bids.truncate(12);
        let ranking = select_fit(&lot, &bids, &w);
        assert_eq!(ranking.ranked.len(), bids.len());
        let order = |id: &str| bids.iter().position(|b| b.id == id).unwrap();
        for pair in ranking.ranked.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(a.valid || !b.valid);
            if a.valid && b.valid {
                assert!(a.counterparty_units <= b.counterparty_units);
                if a.counterparty_units == b.counterparty_units {
                    assert!(order(&a.bid.id) < order(&b.bid.id));
                }
            }
            if !a.valid && !b.valid {
                assert!(order(&a.bid.id) < order(&b.bid.id));
            }
        }
    }
}
