use num_rational::Ratio;
use proptest::prelude::*;

use stratos::douts::{score, DoutsInput, LiftConditions, Rational, RuleTag};

fn r(n: i128, d: i128) -> Rational {
    Ratio::new(n, d)
}

fn input(lift: [bool; 5], service: Rational, production: Rational) -> DoutsInput {
    DoutsInput {
        service_contracted: true,
        sources_transferred: true,
        independent_markets_as_economic: false,
        initial_production_by_transferred_sources: true,
        lift_conditions: LiftConditions::from_array(lift),
        service_volume: service,
        transferred_production_volume: production,
        multi_party: false,
    }
}

/// The rule table evaluated directly, one rule at a time.
fn oracle(i: &DoutsInput) -> Rational {
    if !(i.service_contracted && i.sources_transferred) || i.independent_markets_as_economic {
        return r(0, 1);
    }
    let base = if i.initial_production_by_transferred_sources {
        let k = i.lift_conditions.as_array().iter().filter(|b| **b).count() as i128;
        r(7, 10) + r(3 * k, 50)
    } else {
        r(7, 20)
    };
    let (vs, vp) = (i.service_volume, i.transferred_production_volume);
    if vs == vp {
        base
    } else if vs > vp {
        base * vp / vs
    } else {
        base * vs / vp
    }
}

const RATIOS: [(i128, i128); 5] = [(1, 4), (1, 2), (1, 1), (2, 1), (4, 1)];

fn sweep() -> Vec<([bool; 5], (i128, i128), Rational)> {
    let mut out = Vec::new();
    for mask in 0..32u8 {
        let lift = std::array::from_fn(|b| mask & (1 << b) != 0);
        for (n, d) in RATIOS {
            let value = score(&input(lift, r(n, d), r(1, 1))).unwrap().value;
            out.push((lift, (n, d), value));
        }
    }
    out
}

#[test]
fn boundary_values() {
    let mut no_service = input([false; 5], r(1, 1), r(1, 1));
    no_service.service_contracted = false;
    let s = score(&no_service).unwrap();
    assert_eq!(s.value, r(0, 1));
    assert_eq!(s.rules(), vec![RuleTag::Rule1]);

    let mut separate = input([true; 5], r(1, 1), r(1, 1));
    separate.independent_markets_as_economic = true;
    let s = score(&separate).unwrap();
    assert_eq!(s.value, r(0, 1));
    assert!(s.rules().contains(&RuleTag::Rule2));

    let s = score(&input([false; 5], r(1, 1), r(1, 1))).unwrap();
    assert_eq!(s.value, r(7, 10));
    assert_eq!(s.rules(), vec![RuleTag::Rule4, RuleTag::Rule5]);

    assert_eq!(score(&input([true; 5], r(1, 1), r(1, 1))).unwrap().value, r(1, 1));
}

#[test]
fn sweep_matches_oracle_and_stays_in_unit_interval() {
    let cases = sweep();
    assert_eq!(cases.len(), 160);
    for (lift, (n, d), value) in cases {
        assert_eq!(value, oracle(&input(lift, r(n, d), r(1, 1))));
        assert!(value >= r(0, 1) && value <= r(1, 1));
    }
}

#[test]
fn adding_a_lift_condition_never_lowers_the_score() {
    for (lift, (n, d), value) in sweep() {
        for b in 0..5 {
            if !lift[b] {
                let mut more = lift;
                more[b] = true;
                assert!(score(&input(more, r(n, d), r(1, 1))).unwrap().value >= value);
            }
        }
    }
}

#[test]
fn a_wider_volume_gap_never_raises_the_score() {
    for mask in 0..32u8 {
        let lift: [bool; 5] = std::array::from_fn(|b| mask & (1 << b) != 0);
        let at = |n, d| score(&input(lift, r(n, d), r(1, 1))).unwrap().value;
        assert!(at(1, 1) >= at(2, 1) && at(2, 1) >= at(4, 1));
        assert!(at(1, 1) >= at(1, 2) && at(1, 2) >= at(1, 4));
        assert_eq!(at(2, 1), at(1, 2));
    }
}

#[test]
fn engine_defined_base_is_marked_in_the_trace() {
    let mut i = input([true; 5], r(1, 1), r(1, 1));
    i.initial_production_by_transferred_sources = false;
    let s = score(&i).unwrap();
    assert_eq!(s.value, r(7, 20));
    assert!(s.rule_trace.iter().any(|t| t.rule == RuleTag::Rule4 && t.detail.contains("engine-defined")));
}

#[test]
fn invalid_volumes_are_rejected() {
    let i = input([false; 5], r(-1, 1), r(1, 1));
    assert_eq!(score(&i).unwrap_err().code(), "INVALID_INPUT");
    let mut i = input([false; 5], r(1, 1), r(1, 1));
    i.sources_transferred = false;
    assert_eq!(score(&i).unwrap_err().code(), "INVALID_INPUT");
}

proptest! {
    #[test]
    fn score_matches_oracle(
        contracted: bool,
        transferred: bool,
        separate: bool,
        initial: bool,
        lift in any::<[bool; 5]>(),
        vs in 1i128..50,
        vp in 1i128..50,
    ) {
        let vp = if transferred { vp } else { 0 };
        let mut i = input(lift, r(vs, 1), r(vp, 1));
        i.service_contracted = contracted;
        i.sources_transferred = transferred;
        i.independent_markets_as_economic = separate;
        i.initial_production_by_transferred_sources = initial;
        let s = score(&i).unwrap();
        prop_assert_eq!(s.value, oracle(&i));
        prop_assert!(!s.rule_trace.is_empty());
    }
}
