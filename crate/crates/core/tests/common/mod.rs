#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stratos::model::*;
use stratos::transformations::{apply, ServicePayload, Subject, TransformationKind as Kind, TransformationSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every `.srcm` file under the corpus directory, in path order.
pub fn corpus_files(sub: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![corpus_dir().join(sub)];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "srcm") {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

pub fn theme_of(u: &UnitId) -> ThemeId {
    ThemeId::from(format!("T{}", &u.as_str()[1..]).as_str())
}

pub const TYPES: [(&str, bool); 3] = [("Ta", false), ("Tb", false), ("Tc", true)];

/// A random well-formed world with at most 4 units and 6 sources.
pub fn random_state(rng: &mut impl Rng) -> WorldState {
    random_state_sized(rng, 4, 6)
}

pub fn random_state_sized(rng: &mut impl Rng, max_units: usize, max_sources: usize) -> WorldState {
    loop {
        let state = candidate_state(rng, max_units, max_sources);
        if validate_state(&state).is_empty() {
            return state;
        }
    }
}

fn candidate_state(rng: &mut impl Rng, max_units: usize, max_sources: usize) -> WorldState {
    let mut w = WorldState::new();
    let n_units = rng.gen_range(1..=max_units as i32);
    let units: Vec<UnitId> = (0..n_units).map(|i| UnitId::from(format!("U{i}").as_str())).collect();
    for u in &units {
        w.add_unit(Unit::new(u.clone()));
        w.add_theme(Theme { id: theme_of(u), maintainer: u.clone(), name: String::new(), cluster: None });
    }
    for (t, singleton) in TYPES {
        w.add_source_type(t, singleton);
    }
    let n_sources = rng.gen_range(0..=max_sources as i32);
    let sources: Vec<SourceId> = (0..n_sources).map(|i| SourceId::from(format!("S{i}").as_str())).collect();
    for (i, s) in sources.iter().enumerate() {
        let owner = units[rng.gen_range(0..units.len())].clone();
        let mut ty = TYPES[rng.gen_range(0..TYPES.len())].0;
        let has_singleton = w.sources.values().any(|x| x.owner == owner && x.source_type.as_str() == "Tc");
        if ty == "Tc" && has_singleton {
            ty = "Ta";
        }
        let depends_on =
            sources.iter().enumerate().filter(|(j, _)| *j != i && rng.gen_bool(0.15)).map(|(_, d)| d.clone()).collect();
        w.add_source(Source {
            id: s.clone(),
            source_type: SourceTypeId::from(ty),
            owner,
            descriptor: String::new(),
            depends_on,
        });
    }
    for u in &units {
        for s in &sources {
            if rng.gen_bool(0.4) {
                w.add_use(UseRelation::new(u.clone(), s.clone(), theme_of(u)));
            }
        }
    }
    if units.len() >= 2 {
        for k in 0..rng.gen_range(0..=3) {
            let provider = units[rng.gen_range(0..units.len())].clone();
            let consumer = units[rng.gen_range(0..units.len())].clone();
            if provider == consumer {
                continue;
            }
            w.add_contract(contract(&format!("K{k}"), &provider, &consumer));
        }
        for u in &units {
            for s in &sources {
                if w.sources[s].owner != *u && rng.gen_bool(0.08) {
                    w.add_commitment(SourceCommitment {
                        id: CommitmentId::from(format!("{u}@{s}").as_str()),
                        committed_unit: u.clone(),
                        source: s.clone(),
                        origin: CommitmentOrigin::Event(0),
                    });
                }
            }
        }
    }
    for (i, u) in units.iter().enumerate() {
        let used: Vec<&SourceId> = w.use_relations.iter().filter(|r| &r.user == u).map(|r| &r.source).collect();
        if used.is_empty() || rng.gen_bool(0.4) {
            continue;
        }
        let mut sm = Sourcement::new(format!("Sm{i}").as_str(), u.clone());
        sm.themes.insert(theme_of(u));
        if rng.gen_bool(0.5) {
            sm.attributes.thematic_operations = Some("operations".into());
        }
        // Group used sources by owner, either one group per owner or one
        // group per source.
        let grouped = rng.gen_bool(0.5);
        let mut by_owner: std::collections::BTreeMap<UnitId, BTreeSet<SourceId>> = Default::default();
        for s in used {
            by_owner.entry(w.sources[s].owner.clone()).or_default().insert(s.clone());
        }
        for (owner, group) in by_owner {
            if grouped {
                sm.basics.insert(BasicSourcement { sources: group, owner });
            } else {
                for s in group {
                    sm.basics.insert(BasicSourcement { sources: BTreeSet::from([s]), owner: owner.clone() });
                }
            }
        }
        sm.recompute_providers();
        w.add_sourcement(sm);
    }
    w
}

pub fn contract(id: &str, provider: &UnitId, consumer: &UnitId) -> ServiceContract {
    ServiceContract {
        id: ContractId::from(id),
        provider: provider.clone(),
        consumer: consumer.clone(),
        theme: theme_of(consumer),
        period: Period { start: 0, end: 60 },
        termination_protocol: String::new(),
        notice_interval: 12,
        compensation: Compensation::None,
        intentional_commitment_terms: CommitmentTerms::default(),
        unit_commitment: false,
        management_source: None,
    }
}

pub fn service(id: &str, consumer: &UnitId) -> ServicePayload {
    ServicePayload {
        contract: ContractId::from(id),
        theme: theme_of(consumer),
        period: Period { start: 0, end: 60 },
        notice_interval: 12,
        termination_protocol: String::new(),
        terms: CommitmentTerms::default(),
        unit_commitment: false,
        management_source: None,
    }
}

/// A world state together with the event log that led to it.
#[derive(Clone)]
pub struct Context {
    pub state: WorldState,
    pub log: HistoryLog,
}

fn spec(kind: Kind, actor: &UnitId, to: &[&UnitId], subject: Subject) -> TransformationSpec {
    TransformationSpec::new(kind, actor.clone(), subject).with_counterparties(to.iter().map(|u| (*u).clone()))
}

fn one(s: &SourceId) -> Subject {
    Subject::Sources(BTreeSet::from([s.clone()]))
}

/// Candidate transformations for a context, one or more per kind. Not all
/// of them are applicable.
pub fn candidate_specs(state: &WorldState) -> Vec<TransformationSpec> {
    let units: Vec<&UnitId> = state.units.keys().collect();
    let mut out = Vec::new();
    for &u in &units {
        let owned: Vec<&SourceId> = state.sources.values().filter(|s| &s.owner == u).map(|s| &s.id).collect();
        for &s in &owned {
            out.push(spec(Kind::DropSource, u, &[], one(s)));
        }
        let mut develop = spec(Kind::DevelopSource, u, &[], one(&SourceId::from("New")));
        develop.develop = Some(stratos::transformations::DevelopPayload {
            source_type: SourceTypeId::from("Ta"),
            descriptor: "developed".into(),
            depends_on: owned.first().map(|s| (*s).clone()).into_iter().collect(),
            use_for: Some(theme_of(u)),
        });
        out.push(develop);
        for sm in state.sourcements.values().filter(|sm| &sm.principal == u) {
            out.push(spec(Kind::DecomposeSourcement, u, &[], Subject::Sourcement(sm.id.clone())));
        }
        for &v in units.iter().filter(|v| **v != u) {
            for &s in &owned {
                let mut o = spec(Kind::Outsource, u, &[v], one(s)).with_service(service("New", u));
                out.push(o.clone());
                o.commitments_to_create = BTreeSet::from([s.clone()]);
                out.push(o);
                out.push(spec(Kind::SourceExternalization, u, &[v], one(s)));
                out.push(spec(Kind::Insource, v, &[u], one(s)).with_service(service("New", u)));
                out.push(spec(Kind::Backsource, v, &[u], one(s)));
                out.push(spec(Kind::SourceInternalization, v, &[u], one(s)));
            }
            for (t, _) in TYPES {
                out.push(
                    spec(Kind::OutsourceOfType, u, &[v], Subject::Type(SourceTypeId::from(t)))
                        .with_service(service("New", u)),
                );
            }
            for c in state.contracts.values().filter(|c| &c.consumer == u && &c.provider != v) {
                let subject = Subject::Contract(c.id.clone());
                out.push(spec(Kind::FollowUpOutsource, u, &[v], subject.clone()).with_service(service("New", u)));
                let mut p = spec(Kind::ProgressiveOutsource, u, &[v], subject).with_service(service("New", u));
                p.mission_tied = Some(true);
                out.push(p);
            }
        }
    }
    out
}

const PER_KIND: usize = 2;

/// Applicable transformations over a generated corpus: each random state
/// plus the states one outsourcing further on, so that kinds that need a
/// prior outsourcing get exercised. At most two cases per kind and state.
pub fn applicable_cases(seed: u64, states: usize) -> Vec<(Context, TransformationSpec)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..states {
        let base = Context { state: random_state(&mut r), log: HistoryLog::new() };
        let mut contexts = vec![base.clone()];
        for spec in candidate_specs(&base.state) {
            if matches!(spec.kind, Kind::Outsource | Kind::OutsourceOfType) {
                if let Ok((state, log)) = apply(&base.state, &spec, &base.log) {
                    contexts.push(Context { state, log });
                }
            }
        }
        contexts.truncate(4);
        for ctx in contexts {
            let mut taken: std::collections::BTreeMap<Kind, usize> = Default::default();
            for spec in candidate_specs(&ctx.state) {
                let count = taken.entry(spec.kind).or_insert(0);
                if *count < PER_KIND && apply(&ctx.state, &spec, &ctx.log).is_ok() {
                    *count += 1;
                    out.push((ctx.clone(), spec));
                }
            }
        }
    }
    out
}
